//! Derivative-free minimizers used by the maximum-likelihood fits.

/// Result of a bounded scalar minimization.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScalarMin {
    pub x: f64,
    pub value: f64,
}

/// Brent's minimizer on `[lo, hi]` (golden section with parabolic steps),
/// stopping when the bracket half-width drops below `xtol`.
pub(crate) fn brent_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> ScalarMin {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..500 {
        let m = 0.5 * (a + b);
        let tol1 = 1e-12 * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else if d > 0.0 { x + tol1 } else { x - tol1 };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    ScalarMin { x, value: fx }
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexMin {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Nelder–Mead minimization from `start` with per-coordinate initial steps.
/// Stops when every vertex lies within `xtol` of the best one in every
/// coordinate, or after `max_evals` evaluations.
pub(crate) fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    steps: &[f64],
    xtol: f64,
    max_evals: usize,
) -> SimplexMin {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += steps[i];
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;

    let order = |values: &[f64]| {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        idx
    };

    while evals < max_evals {
        let idx = order(&values);
        let (best, worst, second) = (idx[0], idx[n], idx[n - 1]);
        let spread = simplex
            .iter()
            .map(|p| p.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= xtol {
            break;
        }

        let mut centroid = vec![0.0; n];
        for &i in &idx[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[worst]).map(|(c, w)| c + t * (w - c)).collect()
        };

        let reflected = along(-1.0);
        let f_r = f(&reflected);
        evals += 1;
        if f_r < values[best] {
            let expanded = along(-2.0);
            let f_e = f(&expanded);
            evals += 1;
            if f_e < f_r {
                simplex[worst] = expanded;
                values[worst] = f_e;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_r;
            }
        } else if f_r < values[second] {
            simplex[worst] = reflected;
            values[worst] = f_r;
        } else {
            let (contracted, f_c) = if f_r < values[worst] {
                let c = along(-0.5);
                let fc = f(&c);
                (c, fc)
            } else {
                let c = along(0.5);
                let fc = f(&c);
                (c, fc)
            };
            evals += 1;
            if f_c < values[worst].min(f_r) {
                simplex[worst] = contracted;
                values[worst] = f_c;
            } else {
                let anchor = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                        *x = a + 0.5 * (*x - a);
                    }
                    values[i] = f(&simplex[i]);
                    evals += 1;
                }
            }
        }
    }
    let best = order(&values)[0];
    SimplexMin { x: simplex[best].clone(), value: values[best] }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_parabola_vertex() {
        let r = brent_min(|x| (x - 2.345).powi(2) + 1.0, 1.0, 6.0, 1e-9);
        assert!((r.x - 2.345).abs() < 1e-8);
    }

    #[test]
    fn brent_stays_in_bracket_on_monotone_function() {
        let r = brent_min(|x| -x, 1.0, 6.0, 1e-9);
        assert!(r.x <= 6.0 && r.x > 6.0 - 1e-6);
    }

    #[test]
    fn simplex_on_rosenbrock() {
        let r = nelder_mead(
            |p| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2),
            &[-1.2, 1.0],
            &[0.1, 0.1],
            1e-10,
            20_000,
        );
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }
}
