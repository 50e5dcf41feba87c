//! Subplex: Nelder-Mead searches over an adaptive partition of the
//! coordinates into low-dimensional subspaces.

use super::{Bounds, OptimResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SubplexConfig {
    /// Reflection coefficient.
    pub alpha: f64,
    /// Contraction coefficient.
    pub beta: f64,
    /// Expansion coefficient.
    pub gamma: f64,
    /// Shrink coefficient.
    pub delta: f64,
    /// Simplex reduction coefficient (inner termination and single-subspace step factor).
    pub psi: f64,
    /// Step reduction coefficient bounding the step-size rescaling.
    pub omega: f64,
    pub nsmin: usize,
    /// `None` means `min(5, dim)`.
    pub nsmax: Option<usize>,
    /// Maximum number of objective evaluations.
    pub budget: usize,
    /// Relative step-size tolerance of the outer loop.
    pub xtol: f64,
}

impl Default for SubplexConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            gamma: 2.0,
            delta: 0.5,
            psi: 0.25,
            omega: 0.1,
            nsmin: 2,
            nsmax: None,
            budget: 10_000,
            xtol: 1e-10,
        }
    }
}

/// Splits coordinates into consecutive groups of the progress ordering.
///
/// `progress[i] = |dx_i|`. Coordinates are sorted by decreasing progress and
/// cut greedily where the mean progress inside the group most exceeds the
/// mean progress of the remainder.
pub fn partition_subspaces(progress: &[f64], nsmin: usize, nsmax: usize) -> Result<Vec<Vec<usize>>> {
    let n = progress.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let nsmin = nsmin.clamp(1, n);
    let nsmax = nsmax.clamp(nsmin, n);
    if n.div_ceil(nsmax) * nsmin > n {
        return Err(Error::config(format!(
            "dimension {n} cannot be split into subspaces of size {nsmin}..={nsmax}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| progress[j].total_cmp(&progress[i]).then(i.cmp(&j)));
    let mut groups = Vec::new();
    let mut start = 0;
    while start < n {
        let remaining = n - start;
        let mut best: Option<(usize, f64)> = None;
        for k in nsmin..=nsmax.min(remaining) {
            let rest = remaining - k;
            if rest != 0 && rest < nsmin {
                continue;
            }
            let head: f64 = order[start..start + k].iter().map(|&i| progress[i]).sum::<f64>() / k as f64;
            let tail = if rest == 0 {
                0.0
            } else {
                order[start + k..].iter().map(|&i| progress[i]).sum::<f64>() / rest as f64
            };
            let goodness = head - tail;
            if best.map_or(true, |(_, g)| goodness > g) {
                best = Some((k, goodness));
            }
        }
        let (k, _) = best.ok_or_else(|| Error::config("no feasible subspace size"))?;
        groups.push(order[start..start + k].to_vec());
        start += k;
    }
    Ok(groups)
}

struct Counter<'a, F> {
    f: &'a mut F,
    evals: usize,
    budget: usize,
    best_f: f64,
    best_x: Vec<f64>,
    trace: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> f64> Counter<'_, F> {
    fn exhausted(&self) -> bool {
        self.evals >= self.budget
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < self.best_f {
            self.best_f = v;
            self.best_x.copy_from_slice(x);
        }
        self.trace.push(self.best_f);
        v
    }
}

/// Simplex over a coordinate subspace; vertex 0 is kept as the best.
#[derive(Debug, Clone)]
pub struct Simplex {
    pub vertices: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl Simplex {
    fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&i, &j| self.values[i].total_cmp(&self.values[j]));
        self.vertices = idx.iter().map(|&i| self.vertices[i].clone()).collect();
        self.values = idx.iter().map(|&i| self.values[i]).collect();
    }

    /// Largest 1-norm distance from the best vertex.
    pub fn size(&self) -> f64 {
        let best = &self.vertices[0];
        self.vertices[1..]
            .iter()
            .map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// |det| of the edge matrix, proportional to the simplex volume.
    pub fn volume(&self) -> f64 {
        let n = self.vertices.len() - 1;
        let mut m: Vec<Vec<f64>> = self.vertices[1..]
            .iter()
            .map(|v| v.iter().zip(&self.vertices[0]).map(|(a, b)| a - b).collect())
            .collect();
        let mut det = 1.0;
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
            if m[p][c] == 0.0 {
                return 0.0;
            }
            m.swap(c, p);
            det *= m[c][c];
            for r in c + 1..n {
                let factor = m[r][c] / m[c][c];
                for k in c..n {
                    m[r][k] -= factor * m[c][k];
                }
            }
        }
        det.abs()
    }

    /// Moves every vertex towards the best one by `delta`.
    pub fn shrink(&mut self, delta: f64) {
        let best = self.vertices[0].clone();
        for v in self.vertices.iter_mut().skip(1) {
            for (x, b) in v.iter_mut().zip(&best) {
                *x = b + delta * (*x - b);
            }
        }
    }
}

fn clamp_into(y: &mut [f64], dims: &[usize], bounds: Option<&Bounds>) {
    if let Some(b) = bounds {
        for (v, &d) in y.iter_mut().zip(dims) {
            *v = v.clamp(b.lower[d], b.upper[d]);
        }
    }
}

/// Nelder-Mead over the coordinates `dims`, starting at `x` with signed steps.
/// Updates `x` and `fx` in place with the best vertex found.
fn nelder_mead_subspace<F: FnMut(&[f64]) -> f64>(
    counter: &mut Counter<'_, F>,
    x: &mut [f64],
    fx: &mut f64,
    dims: &[usize],
    steps: &[f64],
    cfg: &SubplexConfig,
    bounds: Option<&Bounds>,
) {
    let m = dims.len();
    let mut full = x.to_vec();
    let mut eval_sub = |counter: &mut Counter<'_, F>, y: &[f64]| {
        for (&d, &v) in dims.iter().zip(y) {
            full[d] = v;
        }
        counter.eval(&full)
    };

    let start: Vec<f64> = dims.iter().map(|&d| x[d]).collect();
    let mut simplex = Simplex {
        vertices: vec![start.clone()],
        values: vec![*fx],
    };
    for j in 0..m {
        if counter.exhausted() {
            return;
        }
        let mut v = start.clone();
        v[j] += steps[j];
        clamp_into(&mut v, dims, bounds);
        if v[j] == start[j] {
            // Step pushed into a bound; go the other way.
            v[j] = start[j] - steps[j];
            clamp_into(&mut v, dims, bounds);
        }
        let fv = eval_sub(counter, &v);
        simplex.vertices.push(v);
        simplex.values.push(fv);
    }
    simplex.sort();
    let initial_size = simplex.size();
    let target = cfg.psi * initial_size;

    while !counter.exhausted() && simplex.size() > target && initial_size > 0.0 {
        let worst = m;
        let centroid: Vec<f64> = (0..m)
            .map(|k| simplex.vertices[..worst].iter().map(|v| v[k]).sum::<f64>() / m as f64)
            .collect();
        let along = |coef: f64, from: &[f64]| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(from).map(|(c, w)| c + coef * (c - w)).collect();
            clamp_into(&mut p, dims, bounds);
            p
        };
        let xw = simplex.vertices[worst].clone();
        let xr = along(cfg.alpha, &xw);
        let fr = eval_sub(counter, &xr);
        if fr < simplex.values[0] {
            let xe = along(cfg.gamma * cfg.alpha, &xw);
            if counter.exhausted() {
                simplex.vertices[worst] = xr;
                simplex.values[worst] = fr;
            } else {
                let fe = eval_sub(counter, &xe);
                if fe < fr {
                    simplex.vertices[worst] = xe;
                    simplex.values[worst] = fe;
                } else {
                    simplex.vertices[worst] = xr;
                    simplex.values[worst] = fr;
                }
            }
        } else if fr < simplex.values[worst - 1] {
            simplex.vertices[worst] = xr;
            simplex.values[worst] = fr;
        } else {
            if counter.exhausted() {
                break;
            }
            let (xc, fc, accept) = if fr < simplex.values[worst] {
                let xc = along(cfg.beta * cfg.alpha, &xw);
                let fc = eval_sub(counter, &xc);
                (xc, fc, fc <= fr)
            } else {
                let xc = along(-cfg.beta, &xw);
                let fc = eval_sub(counter, &xc);
                (xc, fc, fc < simplex.values[worst])
            };
            if accept {
                simplex.vertices[worst] = xc;
                simplex.values[worst] = fc;
            } else {
                simplex.shrink(cfg.delta);
                for j in 1..=m {
                    if counter.exhausted() {
                        simplex.values[j] = f64::INFINITY;
                        continue;
                    }
                    let v = simplex.vertices[j].clone();
                    simplex.values[j] = eval_sub(counter, &v);
                }
            }
        }
        simplex.sort();
    }
    if simplex.values[0] < *fx {
        *fx = simplex.values[0];
        for (&d, &v) in dims.iter().zip(&simplex.vertices[0]) {
            x[d] = v;
        }
    }
}

/// Minimizes `f` from `x0` with initial coordinate steps `scale`.
pub fn subplex_minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scale: &[f64],
    bounds: Option<&Bounds>,
    cfg: &SubplexConfig,
) -> Result<OptimResult> {
    let n = x0.len();
    if n == 0 {
        return Err(Error::config("subplex needs at least one coordinate"));
    }
    if scale.len() != n || scale.iter().any(|s| !(s.abs() > 0.0)) {
        return Err(Error::config("subplex scale must be non-zero in every coordinate"));
    }
    let nsmax = cfg.nsmax.unwrap_or(5).min(n);
    let nsmin = cfg.nsmin.min(n);
    if nsmin > nsmax {
        return Err(Error::config(format!("nsmin {nsmin} exceeds nsmax {nsmax}")));
    }
    let mut x = x0.to_vec();
    if let Some(b) = bounds {
        b.check(&x)?;
    }
    let mut counter = Counter {
        f: &mut f,
        evals: 0,
        budget: cfg.budget,
        best_f: f64::INFINITY,
        best_x: x.clone(),
        trace: Vec::new(),
    };
    if cfg.budget == 0 {
        return Ok(OptimResult {
            x,
            f: f64::NAN,
            evaluations: 0,
            improved: false,
            converged: false,
            trace: Vec::new(),
        });
    }
    let f0 = counter.eval(&x);
    let mut fx = f0;
    let mut steps = scale.to_vec();
    let mut dx = scale.to_vec();
    let mut converged = false;

    while !counter.exhausted() {
        let progress: Vec<f64> = dx.iter().map(|d| d.abs()).collect();
        let groups = partition_subspaces(&progress, nsmin, nsmax)?;
        let x_prev = x.clone();
        for g in &groups {
            let sub_steps: Vec<f64> = g.iter().map(|&i| steps[i]).collect();
            nelder_mead_subspace(&mut counter, &mut x, &mut fx, g, &sub_steps, cfg, bounds);
            if counter.exhausted() {
                break;
            }
        }
        dx = x.iter().zip(&x_prev).map(|(a, b)| a - b).collect();

        let factor = if groups.len() > 1 {
            let num: f64 = dx.iter().map(|d| d.abs()).sum();
            let den: f64 = steps.iter().map(|s| s.abs()).sum();
            (num / den).clamp(cfg.omega, 1.0 / cfg.omega)
        } else {
            cfg.psi
        };
        for (s, d) in steps.iter_mut().zip(&dx) {
            let mag = s.abs() * factor;
            *s = if *d != 0.0 { mag.copysign(*d) } else { -mag.copysign(*s) };
        }

        let small = x.iter().zip(&dx).zip(&steps).all(|((xi, di), si)| {
            di.abs().max(si.abs() * cfg.psi) <= cfg.xtol * xi.abs().max(1.0)
        });
        if small {
            converged = true;
            break;
        }
    }
    let evaluations = counter.evals;
    let trace = counter.trace;
    Ok(OptimResult {
        improved: fx < f0,
        x,
        f: fx,
        evaluations,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn rosenbrock_2d() {
        let cfg = SubplexConfig { budget: 10_000, ..Default::default() };
        let r = subplex_minimize(rosenbrock, &[-1.2, 1.0], &[0.1, 0.1], None, &cfg).unwrap();
        assert!(r.f < 1e-6, "f = {} at {:?} after {}", r.f, r.x, r.evaluations);
        assert!(r.evaluations <= 10_000);
    }

    #[test]
    fn already_optimal_point_is_returned() {
        let r = subplex_minimize(|x: &[f64]| x[0].abs(), &[0.0], &[0.5], None, &SubplexConfig::default()).unwrap();
        assert_eq!(r.x, vec![0.0]);
        assert_eq!(r.f, 0.0);
        assert!(!r.improved);
    }

    #[test]
    fn partition_sizes_respect_limits() {
        let groups = partition_subspaces(&[0.3, 0.1, 0.9, 0.2], 2, 3).unwrap();
        let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 4);
        assert!(sizes.iter().all(|s| (2..=3).contains(s)));
        let mut all: Vec<usize> = groups.into_iter().flatten().collect();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn infeasible_partition_is_config_error() {
        assert!(partition_subspaces(&[1.0, 1.0, 1.0], 2, 2).is_err());
    }

    #[test]
    fn best_so_far_is_monotone() {
        let cfg = SubplexConfig { budget: 2_000, ..Default::default() };
        let r = subplex_minimize(rosenbrock, &[-1.2, 1.0], &[0.1, 0.1], None, &cfg).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn shrink_reduces_volume() {
        let mut s = Simplex {
            vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]],
            values: vec![0.0, 1.0, 2.0],
        };
        let before = s.volume();
        s.shrink(0.5);
        assert!((s.volume() - 0.25 * before).abs() < 1e-12);
        assert!(s.volume() < before);
    }

    #[test]
    fn bounds_are_respected() {
        let b = Bounds::new(vec![0.5, 0.5], vec![2.0, 2.0]).unwrap();
        let mut outside = false;
        let r = subplex_minimize(
            |x: &[f64]| {
                outside |= x.iter().any(|v| *v < 0.5 || *v > 2.0);
                x[0] * x[0] + x[1] * x[1]
            },
            &[1.5, 1.5],
            &[0.3, 0.3],
            Some(&b),
            &SubplexConfig::default(),
        )
        .unwrap();
        assert!(!outside);
        assert!((r.x[0] - 0.5).abs() < 1e-6 && (r.x[1] - 0.5).abs() < 1e-6);
    }
}
