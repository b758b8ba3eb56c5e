//! BFGS with a strong-Wolfe line search.

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfgsOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 2000,
            grad_tol: 1e-8,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    /// No step satisfying the Wolfe conditions after at least one accepted
    /// step; usually means the loss is flat to rounding.
    LineSearchStalled,
    /// Line search failed from the starting point.
    LineSearchFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BfgsTrace {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    /// Loss at the start point and after every accepted step.
    pub loss_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    /// Value-and-gradient evaluations spent in each iteration's line search.
    pub line_search_evals: Vec<usize>,
    pub iterations: usize,
    pub value_grad_evals: usize,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn axpy(x: &[f64], alpha: f64, p: &[f64]) -> Vec<f64> {
    x.iter().zip(p).map(|(a, b)| a + alpha * b).collect()
}

struct Point {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

struct LineSearch<'a, F> {
    fg: &'a mut F,
    x: &'a [f64],
    p: &'a [f64],
    f0: f64,
    slope0: f64,
    opts: &'a BfgsOptions,
    evals: usize,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn eval(&mut self, alpha: f64) -> Result<Point> {
        self.evals += 1;
        let (f, g) = (self.fg)(&axpy(self.x, alpha, self.p))?;
        let slope = dot(&g, self.p);
        Ok(Point { alpha, f, g, slope })
    }

    fn armijo_fails(&self, pt: &Point) -> bool {
        !(pt.f <= self.f0 + self.opts.c1 * pt.alpha * self.slope0)
    }

    fn curvature_holds(&self, pt: &Point) -> bool {
        pt.slope.abs() <= -self.opts.c2 * self.slope0
    }

    fn run(&mut self, alpha_init: f64) -> Result<Option<Point>> {
        let mut prev = Point {
            alpha: 0.0,
            f: self.f0,
            g: Vec::new(),
            slope: self.slope0,
        };
        let mut alpha = alpha_init;
        for i in 0..self.opts.max_line_search {
            let pt = self.eval(alpha)?;
            if !pt.f.is_finite() {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if self.armijo_fails(&pt) || (i > 0 && pt.f >= prev.f) {
                return self.zoom(prev, pt);
            }
            if self.curvature_holds(&pt) {
                return Ok(Some(pt));
            }
            if pt.slope >= 0.0 {
                return self.zoom(pt, prev);
            }
            alpha = 2.0 * pt.alpha;
            prev = pt;
        }
        Ok(None)
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Result<Option<Point>> {
        while self.evals < self.opts.max_line_search {
            let width = (hi.alpha - lo.alpha).abs();
            if width <= 1e-14 * lo.alpha.abs().max(1.0) {
                break;
            }
            let trial = cubic_minimizer(&lo, &hi)
                .filter(|a| {
                    let (a0, a1) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
                    *a >= a0 + 0.1 * width && *a <= a1 - 0.1 * width
                })
                .unwrap_or(0.5 * (lo.alpha + hi.alpha));
            let pt = self.eval(trial)?;
            if self.armijo_fails(&pt) || pt.f >= lo.f {
                hi = pt;
            } else {
                if self.curvature_holds(&pt) {
                    return Ok(Some(pt));
                }
                if pt.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = pt;
            }
        }
        Ok(None)
    }
}

/// Minimizer of the cubic interpolating value and slope at both ends.
fn cubic_minimizer(a: &Point, b: &Point) -> Option<f64> {
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let denom = b.slope - a.slope + 2.0 * d2;
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

/// Minimizes `f` given a combined value-and-gradient callback. The inverse
/// Hessian starts at the identity and is rescaled by `yᵀs / yᵀy` before the
/// first update.
pub fn minimize<F>(mut fg: F, x0: Vec<f64>, opts: &BfgsOptions) -> Result<BfgsTrace>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let (mut f, mut g) = fg(&x0)?;
    let mut x = x0;
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        (0..n).for_each(|i| h[i * n + i] = 1.0);
    };
    reset(&mut h);
    let mut scaled = false;

    let mut trace = BfgsTrace {
        x: Vec::new(),
        f,
        grad: Vec::new(),
        loss_history: vec![f],
        grad_norm_history: vec![inf_norm(&g)],
        line_search_evals: Vec::new(),
        iterations: 0,
        value_grad_evals: 1,
        termination: Termination::MaxIterations,
    };

    while trace.iterations < opts.max_iter {
        if inf_norm(&g) <= opts.grad_tol {
            trace.termination = Termination::GradientTolerance;
            break;
        }
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) {
            reset(&mut h);
            p = g.iter().map(|v| -v).collect();
            slope = dot(&g, &p);
        }
        let alpha_init = if trace.iterations == 0 {
            (1.0 / inf_norm(&g)).min(1.0)
        } else {
            1.0
        };
        let mut search = LineSearch {
            fg: &mut fg,
            x: &x,
            p: &p,
            f0: f,
            slope0: slope,
            opts,
            evals: 0,
        };
        let found = search.run(alpha_init)?;
        let evals = search.evals;
        trace.value_grad_evals += evals;
        let Some(pt) = found else {
            trace.line_search_evals.push(evals);
            trace.termination = if trace.iterations == 0 {
                Termination::LineSearchFailed
            } else {
                Termination::LineSearchStalled
            };
            break;
        };
        trace.line_search_evals.push(evals);

        let s: Vec<f64> = p.iter().map(|v| v * pt.alpha).collect();
        let y: Vec<f64> = pt.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        x = axpy(&x, 1.0, &s);
        f = pt.f;
        g = pt.g;
        trace.iterations += 1;
        trace.loss_history.push(f);
        trace.grad_norm_history.push(inf_norm(&g));

        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if !scaled {
                let gamma = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= gamma);
                scaled = true;
            }
            bfgs_update(&mut h, &s, &y, 1.0 / sy);
        }
    }
    trace.x = x;
    trace.f = f;
    trace.grad = g;
    Ok(trace)
}

/// `H <- (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ`
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], rho: f64) {
    let n = s.len();
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    let coef = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}
