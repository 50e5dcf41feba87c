//! Particle estimates of `E[v | s]` with a Gaussian mollifier.

/// `1.5 * std(s) * N^(-1/5)`; zero when all particles coincide.
pub fn auto_bandwidth(s: &[f64]) -> f64 {
    let n = s.len() as f64;
    if s.len() < 2 {
        return 0.0;
    }
    let mean = s.iter().sum::<f64>() / n;
    let var = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    1.5 * var.sqrt() * n.powf(-0.2)
}

fn weight(d: f64, eps: f64) -> f64 {
    if eps.is_infinite() {
        1.0
    } else {
        let z = d / eps;
        (-0.5 * z * z).exp()
    }
}

/// Kernel-weighted mean of `v^+` at `x`, summing over every particle.
/// `None` when no particle carries weight.
pub fn conditional_mean_exact(s: &[f64], v: &[f64], x: f64, eps: f64) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (sj, vj) in s.iter().zip(v) {
        let w = weight(x - sj, eps);
        num += vj.max(0.0) * w;
        den += w;
    }
    (den > 0.0).then(|| num / den)
}

/// `v_i^+ * sum_j K(s_i - s_j) / sum_j v_j^+ K(s_i - s_j)`, or 1 when every
/// truncated variance in the kernel support vanishes.
pub fn conditional_variance_ratio(s: &[f64], v: &[f64], i: usize, eps: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (sj, vj) in s.iter().zip(v) {
        let w = weight(s[i] - sj, eps);
        den += vj.max(0.0) * w;
        num += w;
    }
    if den > 0.0 {
        v[i].max(0.0) * num / den
    } else {
        1.0
    }
}

/// Binned estimate of `E[v^+ | s]`: particles are grouped into bins of
/// roughly equal count, kernel sums run over bins and the result is
/// interpolated linearly between bin centres.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRegression {
    centers: Vec<f64>,
    means: Vec<f64>,
}

const CELLS_PER_BIN: usize = 16;

impl KernelRegression {
    pub fn build(s: &[f64], v: &[f64], eps: f64, bins: usize) -> Self {
        let n = s.len();
        let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
        if n == 0 || !(hi - lo > 1e-14 * (1.0 + hi.abs())) || !(eps > 0.0) || eps.is_infinite() {
            let mean = v.iter().map(|x| x.max(0.0)).sum::<f64>() / n.max(1) as f64;
            return Self { centers: vec![0.5 * (lo + hi)], means: vec![mean] };
        }
        let cells = CELLS_PER_BIN * bins.max(1);
        let width = (hi - lo) / cells as f64;
        let mut count = vec![0.0f64; cells];
        let mut sum_v = vec![0.0f64; cells];
        let mut sum_s = vec![0.0f64; cells];
        for (x, vi) in s.iter().zip(v) {
            let c = (((x - lo) / width) as usize).min(cells - 1);
            count[c] += 1.0;
            sum_v[c] += vi.max(0.0);
            sum_s[c] += x;
        }
        let target = n as f64 / bins as f64;
        let (mut centers, mut bn, mut bv) = (Vec::new(), Vec::new(), Vec::new());
        let (mut acc_n, mut acc_v, mut acc_s, mut cum) = (0.0, 0.0, 0.0, 0.0);
        let mut next_cut = target;
        for c in 0..cells {
            acc_n += count[c];
            acc_v += sum_v[c];
            acc_s += sum_s[c];
            cum += count[c];
            if acc_n > 0.0 && (cum >= next_cut - 1e-9 || c == cells - 1) {
                centers.push(acc_s / acc_n);
                bn.push(acc_n);
                bv.push(acc_v);
                acc_n = 0.0;
                acc_v = 0.0;
                acc_s = 0.0;
                while next_cut <= cum + 1e-9 {
                    next_cut += target;
                }
            }
        }
        let means = centers
            .iter()
            .map(|&x| {
                let (mut num, mut den) = (0.0, 0.0);
                for ((c, nb), vb) in centers.iter().zip(&bn).zip(&bv) {
                    let w = weight(x - c, eps);
                    num += vb * w;
                    den += nb * w;
                }
                if den > 0.0 {
                    num / den
                } else {
                    0.0
                }
            })
            .collect();
        Self { centers, means }
    }

    pub fn bins(&self) -> usize {
        self.centers.len()
    }

    /// Estimated `E[v^+ | s = x]`, flat beyond the outer bin centres.
    pub fn mean_at(&self, x: f64) -> f64 {
        let c = &self.centers;
        let n = c.len();
        if n == 1 || x <= c[0] {
            return self.means[0];
        }
        if x >= c[n - 1] {
            return self.means[n - 1];
        }
        let j = c.partition_point(|&y| y < x);
        let w = (x - c[j - 1]) / (c[j] - c[j - 1]);
        self.means[j - 1] + w * (self.means[j] - self.means[j - 1])
    }

    pub fn ratio(&self, x: f64, v: f64) -> f64 {
        let m = self.mean_at(x);
        if m > 0.0 {
            v.max(0.0) / m
        } else {
            1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slv_mc::rng::ParticleRng;
    use proptest::prelude::*;

    #[test]
    fn constant_variance_gives_unit_ratio() {
        let s: Vec<f64> = (0..500).map(|i| 0.5 + i as f64 / 500.0).collect();
        let v = vec![0.7; 500];
        for i in [0, 100, 499] {
            assert!((conditional_variance_ratio(&s, &v, i, 0.05) - 1.0).abs() < 1e-14);
        }
        let kr = KernelRegression::build(&s, &vec![1.0; 500], 0.05, 20);
        assert_eq!(kr.ratio(0.8, 1.0), 1.0);
    }

    #[test]
    fn two_particles_by_hand() {
        let s = [1.0, 1.0 + 1e-9];
        let v = [1.0, 3.0];
        assert!((conditional_variance_ratio(&s, &v, 0, 0.1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn flat_kernel_limit_on_four() {
        let s = [0.2, 0.9, 1.1, 3.0];
        let v = [1.0, 2.0, 3.0, 6.0];
        let r = conditional_variance_ratio(&s, &v, 1, f64::INFINITY);
        assert!((r - 2.0 / 3.0).abs() < 1e-15);
        let wide = conditional_variance_ratio(&s, &v, 1, 1e8);
        assert!((wide - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn all_truncated_zero_gives_one() {
        let s = [0.9, 1.0, 1.1];
        let v = [-0.1, 0.0, -2.0];
        assert_eq!(conditional_variance_ratio(&s, &v, 1, 0.1), 1.0);
        let kr = KernelRegression::build(&s, &v, 0.1, 2);
        assert_eq!(kr.ratio(1.0, 0.0), 1.0);
    }

    #[test]
    fn binned_tracks_exact_on_smooth_field() {
        let n = 20_000;
        let mut rng = ParticleRng::new(11, 0);
        let s: Vec<f64> = (0..n).map(|_| 1.0 + 0.2 * rng.normals()[0]).collect();
        let v: Vec<f64> = s.iter().enumerate().map(|(i, x)| 1.0 + (x - 1.0) * 2.0 + 0.3 * ((i % 7) as f64 - 3.0) / 3.0).collect();
        let eps = auto_bandwidth(&s);
        let kr = KernelRegression::build(&s, &v, eps, 200);
        for x in [0.7, 0.9, 1.0, 1.15, 1.3] {
            let exact = conditional_mean_exact(&s, &v, x, eps).unwrap();
            assert!((kr.mean_at(x) - exact).abs() < 5e-3, "x={x}: {} vs {exact}", kr.mean_at(x));
        }
    }

    #[test]
    fn identical_particles_use_flat_mean() {
        let s = vec![1.0; 10];
        let v: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(auto_bandwidth(&s), 0.0);
        let kr = KernelRegression::build(&s, &v, 0.0, 5);
        assert_eq!(kr.mean_at(1.0), 4.5);
    }

    proptest! {
        #[test]
        fn ratio_is_positive_and_finite(
            s in proptest::collection::vec(0.0f64..3.0, 2..40),
            seed in 0u64..1000,
            eps in 0.01f64..1.0,
        ) {
            let v: Vec<f64> = (0..s.len()).map(|i| 0.1 + ((seed + i as u64) % 13) as f64 / 5.0).collect();
            for i in 0..s.len() {
                let r = conditional_variance_ratio(&s, &v, i, eps);
                prop_assert!(r > 0.0 && r.is_finite());
            }
        }
    }
}
