//! Derivative-free minimizers used by hyperparameter estimation.

/// Axis-aligned box.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| v.clamp(self.lower[j], self.upper[j]))
            .collect()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Nelder-Mead simplex search. Trial points are projected onto `bounds` before
/// evaluation; non-finite values are treated as `+∞`.
pub fn nelder_mead<F>(mut f: F, start: &[f64], step: f64, bounds: &Bounds, max_evals: usize, tol: f64) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let evaluations = std::cell::Cell::new(0usize);
    let mut eval = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let x0 = bounds.clamp(start);
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.clone(), eval(&x0))];
    for j in 0..n {
        let mut x = x0.clone();
        let delta = step * bounds.width(j);
        x[j] = if x[j] + delta <= bounds.upper[j] { x[j] + delta } else { x[j] - delta };
        let x = bounds.clamp(&x);
        let v = eval(&x);
        simplex.push((x, v));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    while evaluations.get() < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = simplex
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= tol * (1.0 + best.abs()) && spread <= tol {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let x: Vec<f64> = (0..n)
                .map(|j| centroid[j] + t * (simplex[n].0[j] - centroid[j]))
                .collect();
            bounds.clamp(&x)
        };

        let xr = along(-alpha);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-gamma);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(-rho);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(rho);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best_x = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            let shrunk: Vec<f64> = x
                .iter()
                .zip(&best_x)
                .map(|(xi, bi)| bi + sigma * (xi - bi))
                .collect();
            *x = bounds.clamp(&shrunk);
            *v = eval(x);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        evaluations: evaluations.get(),
    }
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
/// Returns the best abscissa probed, including the end points.
pub fn golden_section_max<F>(mut f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = (a, f(a));
    let fb = f(b);
    if fb > best.1 {
        best = (b, fb);
    }
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if fc > best.1 {
            best = (c, fc);
        }
        if fd > best.1 {
            best = (d, fd);
        }
        if (b - a).abs() <= tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc > best.1 {
        best = (c, fc);
    }
    if fd > best.1 {
        best = (d, fd);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let bounds = Bounds::new(vec![-2.0, -2.0], vec![2.0, 2.0]);
        let m = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.0, 1.5],
            0.1,
            &bounds,
            5000,
            1e-12,
        );
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn respects_bounds() {
        let bounds = Bounds::new(vec![0.0], vec![1.0]);
        let m = nelder_mead(|x| -x[0], &[0.2], 0.1, &bounds, 200, 1e-10);
        assert!((m.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden() {
        let (x, v) = golden_section_max(|x| -(x - 0.3).powi(2), -1.0, 1.0, 1e-10, 200);
        assert!((x - 0.3).abs() < 1e-6);
        assert!(v <= 0.0);
    }
}
