//! Derivative-free search and space-filling designs used by the GP fit and
//! the acquisition step.

use rand::seq::SliceRandom;
use rand::Rng;

/// Latin hypercube on the unit cube: each column has exactly one point per
/// stratum `[k/n, (k+1)/n)`.
pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, dims: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dims]; n];
    for j in 0..dims {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (pt, k) in pts.iter_mut().zip(strata) {
            pt[j] = (k as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    pts
}

/// Best of `candidates` random Latin hypercubes by minimum pairwise distance.
pub fn maximin_latin_hypercube<R: Rng + ?Sized>(
    n: usize,
    dims: usize,
    candidates: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut best = latin_hypercube(n, dims, rng);
    let mut best_score = min_pairwise_sq(&best);
    for _ in 1..candidates {
        let cand = latin_hypercube(n, dims, rng);
        let score = min_pairwise_sq(&cand);
        if score > best_score {
            best = cand;
            best_score = score;
        }
    }
    best
}

fn min_pairwise_sq(pts: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(d);
        }
    }
    best
}

/// Bounded Nelder–Mead minimization. Vertices are projected onto the box.
pub fn nelder_mead<F>(f: F, start: &[f64], step: &[f64], lo: &[f64], hi: &[f64], max_evals: usize) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    let clamp = |x: &mut Vec<f64>| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut x0 = start.to_vec();
    clamp(&mut x0);
    let f0 = eval(&x0);
    simplex.push((x0.clone(), f0));
    for i in 0..n {
        let mut x = x0.clone();
        x[i] += step[i];
        if x[i] > hi[i] {
            x[i] = x0[i] - step[i];
        }
        clamp(&mut x);
        let fx = eval(&x);
        simplex.push((x, fx));
    }

    while evals.get() < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if (worst - best).abs() <= 1e-10 * (1.0 + best.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|v| v.0[i]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| {
            let mut x: Vec<f64> = (0..n)
                .map(|i| centroid[i] + t * (simplex[n].0[i] - centroid[i]))
                .collect();
            clamp(&mut x);
            x
        };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = if fr < simplex[n].1 { along(-0.5) } else { along(0.5) };
            let fc = eval(&xc);
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let mut x: Vec<f64> = (0..n).map(|i| x_best[i] + 0.5 * (v.0[i] - x_best[i])).collect();
                    clamp(&mut x);
                    let fx = eval(&x);
                    *v = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Coordinate pattern search maximizing `f` inside a box.
///
/// Starts with steps of a quarter of each box width and halves them after
/// an unsuccessful sweep, stopping when every step is below `tol` times
/// its box width or after `max_iters` sweeps.
pub fn pattern_search_max<F>(f: F, start: &[f64], lo: &[f64], hi: &[f64], max_iters: usize, tol: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    let mut x = start.to_vec();
    let mut fx = f(&x);
    let mut steps: Vec<f64> = (0..n).map(|i| 0.25 * (hi[i] - lo[i])).collect();
    for _ in 0..max_iters {
        let mut improved = false;
        for i in 0..n {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] = (x[i] + dir * steps[i]).clamp(lo[i], hi[i]);
                if y[i] == x[i] {
                    continue;
                }
                let fy = f(&y);
                if fy > fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for s in &mut steps {
                *s *= 0.5;
            }
            if (0..n).all(|i| steps[i] < tol * (hi[i] - lo[i])) {
                break;
            }
        }
    }
    (x, fx)
}
