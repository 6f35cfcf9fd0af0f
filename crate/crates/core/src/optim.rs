//! Derivative-free and quasi-Newton minimizers.
//!
//! Both minimizers are deterministic: the same objective and start always
//! produce the same sequence of iterates.

/// Result of a minimization run.
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Absolute tolerance on the spread of objective values over the simplex.
    pub f_tolerance: f64,
    /// Tolerance on the simplex diameter.
    pub x_tolerance: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            f_tolerance: 1e-10,
            x_tolerance: 1e-8,
            initial_step: 0.05,
        }
    }
}

/// Nelder-Mead simplex search with standard coefficients (1, 2, 0.5, 0.5).
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    simplex.push(x0.to_vec());
    for i in 0..d {
        let mut v = x0.to_vec();
        v[i] += if v[i].abs() > 1e-12 { opts.initial_step * v[i].abs().max(0.1) } else { opts.initial_step };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| sanitize(f(v))).collect();
    let mut trace = vec![values.iter().copied().fold(f64::INFINITY, f64::min)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[d] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread.abs() <= opts.f_tolerance * (1.0 + values[0].abs()) && diameter <= opts.x_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|v| v[j]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[d]).map(|(c, w)| c + t * (w - c)).collect()
        };

        let reflected = along(-1.0);
        let fr = sanitize(f(&reflected));
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = sanitize(f(&expanded));
            if fe < fr {
                simplex[d] = expanded;
                values[d] = fe;
            } else {
                simplex[d] = reflected;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            simplex[d] = reflected;
            values[d] = fr;
        } else {
            let (contracted, fc) = if fr < values[d] {
                let c = along(-0.5);
                let fc = sanitize(f(&c));
                (c, fc)
            } else {
                let c = along(0.5);
                let fc = sanitize(f(&c));
                (c, fc)
            };
            if fc < values[d].min(fr) {
                simplex[d] = contracted;
                values[d] = fc;
            } else {
                for i in 1..=d {
                    let shrunk: Vec<f64> = simplex[0]
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, v)| b + 0.5 * (v - b))
                        .collect();
                    values[i] = sanitize(f(&shrunk));
                    simplex[i] = shrunk;
                }
            }
        }
        trace.push(values.iter().copied().fold(f64::INFINITY, f64::min));
    }

    let best = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
        trace,
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Convergence when the max-norm of the gradient drops below this.
    pub gradient_tolerance: f64,
    /// Also converged when an accepted step lowers the objective by less than
    /// `relative_tolerance * (|f| + relative_tolerance)`. Catches runs where
    /// rounding in `f` keeps the gradient just above `gradient_tolerance`.
    pub relative_tolerance: f64,
    pub max_backtracks: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            relative_tolerance: 1e-12,
            max_backtracks: 60,
        }
    }
}

const ARMIJO: f64 = 1e-4;

/// BFGS with a backtracking Armijo line search.
///
/// `f` returns the objective and its gradient. Accepted steps never increase
/// the objective, so `trace` is nonincreasing.
pub fn bfgs<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> Minimum
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let d = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut trace = vec![fx];
    if d == 0 || !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Minimum {
            x,
            value: fx,
            iterations: 0,
            converged: d == 0 && fx.is_finite(),
            trace,
        };
    }
    // inverse Hessian approximation, row-major
    let mut h = identity(d);
    let mut first_step = true;
    let mut converged = max_abs(&g) < opts.gradient_tolerance;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let mut dir = mat_vec(&h, &g).into_iter().map(|v| -v).collect::<Vec<_>>();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            h = identity(d);
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let mut step = 1.0;
        if first_step {
            // keep the very first trial step at unit length
            let norm = dot(&dir, &dir).sqrt();
            if norm > 1.0 {
                step = 1.0 / norm;
            }
        }
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            let (ft, gt) = f(&trial);
            if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= fx + ARMIJO * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            break;
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first_step {
                let scale = sy / dot(&y, &y);
                h = identity(d).into_iter().map(|v| v * scale).collect();
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        first_step = false;
        let stalled = fx - f_new < opts.relative_tolerance * (fx.abs() + opts.relative_tolerance);
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);
        converged = stalled || max_abs(&g) < opts.gradient_tolerance;
    }

    Minimum {
        x,
        value: fx,
        iterations,
        converged,
        trace,
    }
}

/// Central-difference gradient.
pub fn numeric_gradient<F>(f: &mut F, x: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step * (1.0 + x[i].abs());
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let d = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    // H+ = H - rho (H y s' + s y' H) + (rho^2 y'Hy + rho) s s'
    for i in 0..d {
        for j in 0..d {
            h[i * d + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|i| dot(&m[i * d..(i + 1) * d], v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    fn rosenbrock_grad(x: &[f64]) -> Vec<f64> {
        vec![
            -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
            200.0 * (x[1] - x[0] * x[0]),
        ]
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &NelderMeadOptions::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bfgs_rosenbrock_monotone() {
        let m = bfgs(
            |x| (rosenbrock(x), rosenbrock_grad(x)),
            &[-1.2, 1.0],
            &BfgsOptions::default(),
        );
        assert!(m.converged, "{m:?}");
        assert!((m.x[0] - 1.0).abs() < 1e-5);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bfgs_quadratic_exact() {
        let m = bfgs(
            |x| {
                let v = 3.0 * (x[0] - 2.0).powi(2) + (x[1] + 1.0).powi(2);
                (v, vec![6.0 * (x[0] - 2.0), 2.0 * (x[1] + 1.0)])
            },
            &[0.0, 0.0],
            &BfgsOptions::default(),
        );
        assert!(m.converged);
        assert!((m.x[0] - 2.0).abs() < 1e-7 && (m.x[1] + 1.0).abs() < 1e-7);
    }

    #[test]
    fn bfgs_stops_when_the_objective_stops_moving() {
        // the reported gradient never vanishes, so only the relative rule can stop the run
        let f = |_: &[f64]| (1000.0, vec![1.0]);
        let m = bfgs(f, &[0.0], &BfgsOptions::default());
        assert!(m.converged && m.iterations == 1, "{m:?}");
        let strict = BfgsOptions {
            relative_tolerance: 0.0,
            max_iterations: 40,
            ..BfgsOptions::default()
        };
        let stuck = bfgs(f, &[0.0], &strict);
        assert!(!stuck.converged && stuck.iterations == 40, "{stuck:?}");
    }

    #[test]
    fn numeric_gradient_matches() {
        let mut f = rosenbrock;
        let g = numeric_gradient(&mut f, &[0.3, -0.2], 1e-6);
        let exact = rosenbrock_grad(&[0.3, -0.2]);
        for (a, b) in g.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}
