//! Weighted nonlinear least-squares fits of survival decay curves.
//!
//! Three models, with `x = m - 1`:
//!
//! | kind             | parameters          | prediction                     |
//! |------------------|---------------------|--------------------------------|
//! | `single-exp`     | `A, s`              | `A s^x`                        |
//! | `double-exp`     | `B, C, λ+, λ-`      | `B λ+^x + C λ-^x`              |
//! | `tp-constrained` | `B, C, λ`           | `B λ^x + C`                    |
//!
//! Decay parameters are kept in `[-1, 1]`. The minimizer is a
//! Levenberg-Marquardt loop with Marquardt diagonal scaling, analytic
//! Jacobians, at most 200 iterations, and convergence on a relative
//! parameter step below `1e-10`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::DecayDataset;

pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOLERANCE: f64 = 1e-10;
/// `|λ+ - λ-|` below which a double exponential is collapsed to one decay.
pub const DEGENERACY_GAP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    SingleExp,
    DoubleExp,
    TpConstrained,
}

impl ModelKind {
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Self::SingleExp => &["A", "s"],
            Self::DoubleExp => &["B", "C", "lambda_plus", "lambda_minus"],
            Self::TpConstrained => &["B", "C", "lambda"],
        }
    }

    pub fn n_params(&self) -> usize {
        self.param_names().len()
    }

    /// Indices of parameters constrained to `[-1, 1]`.
    fn decay_indices(&self) -> &'static [usize] {
        match self {
            Self::SingleExp => &[1],
            Self::DoubleExp => &[2, 3],
            Self::TpConstrained => &[2],
        }
    }

    pub fn predict(&self, params: &[f64], m: usize) -> f64 {
        let x = m as i32 - 1;
        match self {
            Self::SingleExp => params[0] * params[1].powi(x),
            Self::DoubleExp => params[0] * params[2].powi(x) + params[1] * params[3].powi(x),
            Self::TpConstrained => params[0] * params[2].powi(x) + params[1],
        }
    }

    /// Analytic gradient of the prediction with respect to the parameters.
    pub fn gradient(&self, params: &[f64], m: usize) -> Vec<f64> {
        let x = m as i32 - 1;
        // d/dλ λ^x = x λ^(x-1), zero when x = 0
        let dpow = |l: f64| {
            if x == 0 {
                0.0
            } else {
                x as f64 * l.powi(x - 1)
            }
        };
        match self {
            Self::SingleExp => vec![params[1].powi(x), params[0] * dpow(params[1])],
            Self::DoubleExp => vec![
                params[2].powi(x),
                params[3].powi(x),
                params[0] * dpow(params[2]),
                params[1] * dpow(params[3]),
            ],
            Self::TpConstrained => vec![params[2].powi(x), 1.0, params[0] * dpow(params[2])],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SingleExp => "single-exp",
            Self::DoubleExp => "double-exp",
            Self::TpConstrained => "tp-constrained",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-exp" => Ok(Self::SingleExp),
            "double-exp" => Ok(Self::DoubleExp),
            "tp-constrained" => Ok(Self::TpConstrained),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Weight each point by `1/sem^2` (unit weights if any sem is zero).
    pub weighted: bool,
    pub max_iterations: usize,
    pub step_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            weighted: true,
            max_iterations: MAX_ITERATIONS,
            step_tolerance: STEP_TOLERANCE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Quantities computed from the fitted parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Derived {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_inc: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_coh: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_eigenvalue: Option<Estimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Parameter covariance, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub r2: Option<f64>,
    pub chi2_dof: Option<f64>,
    /// `mean - prediction` per data point.
    pub residuals: Vec<f64>,
    pub weighted: bool,
    pub iterations: usize,
    pub converged: bool,
    /// Set when part of the model is unidentifiable from the data.
    pub degenerate: bool,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<Estimate> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(Estimate {
            value: self.params[i],
            stderr: self.stderr[i],
        })
    }

    pub fn predict(&self, m: usize) -> f64 {
        self.model.predict(&self.params, m)
    }

    pub fn derived(&self) -> Derived {
        let est = |i: usize| Estimate {
            value: self.params[i],
            stderr: self.stderr[i],
        };
        match self.model {
            ModelKind::SingleExp => Derived {
                s_inc: Some(est(1)),
                s_coh: None,
                decay_eigenvalue: None,
            },
            ModelKind::DoubleExp => {
                let var =
                    self.covariance[2][2] + self.covariance[3][3] + 2.0 * self.covariance[2][3];
                Derived {
                    s_inc: None,
                    s_coh: Some(Estimate {
                        value: self.params[2] + self.params[3],
                        stderr: var.max(0.0).sqrt(),
                    }),
                    decay_eigenvalue: Some(est(3)),
                }
            }
            ModelKind::TpConstrained => Derived {
                s_inc: None,
                s_coh: Some(Estimate {
                    value: 1.0 + self.params[2],
                    stderr: self.stderr[2],
                }),
                decay_eigenvalue: Some(est(2)),
            },
        }
    }

    /// JSON report: the result plus its derived quantities.
    pub fn to_json_value(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("fit result serializes");
        v["derived"] = serde_json::to_value(self.derived()).expect("derived serializes");
        v
    }

    /// `name = value ± stderr` for every parameter, then r².
    pub fn summary(&self) -> String {
        let mut parts: Vec<String> = self
            .names
            .iter()
            .zip(self.params.iter().zip(&self.stderr))
            .map(|(n, (v, e))| format!("{n} = {v:.6} ± {e:.2e}"))
            .collect();
        let d = self.derived();
        if let Some(e) = d.s_inc {
            parts.push(format!("s_inc = {:.6} ± {:.2e}", e.value, e.stderr));
        }
        if let Some(e) = d.s_coh {
            parts.push(format!("s_coh = {:.6} ± {:.2e}", e.value, e.stderr));
        }
        if let Some(e) = d.decay_eigenvalue {
            parts.push(format!(
                "decay eigenvalue = {:.6} ± {:.2e}",
                e.value, e.stderr
            ));
        }
        match self.r2 {
            Some(r2) => parts.push(format!("r² = {r2:.4}")),
            None => parts.push("r² undefined".into()),
        }
        if self.degenerate {
            parts.push("degenerate".into());
        }
        format!("{}: {}", self.model, parts.join(", "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Goodness {
    /// `1 - SS_res/SS_tot` on unweighted residuals; `None` for constant data.
    pub r2: Option<f64>,
    /// Weighted `χ²` over degrees of freedom; `None` when `n <= p`.
    pub chi2_dof: Option<f64>,
}

struct Data {
    ms: Vec<usize>,
    ys: Vec<f64>,
    ws: Vec<f64>,
    weighted: bool,
}

impl Data {
    fn new(ds: &DecayDataset, weighted: bool) -> Self {
        let sems = ds.sems();
        let use_w = weighted && sems.iter().all(|&s| s > 0.0 && s.is_finite());
        Self {
            ms: ds.ms(),
            ys: ds.means(),
            ws: if use_w {
                sems.iter().map(|s| 1.0 / (s * s)).collect()
            } else {
                vec![1.0; sems.len()]
            },
            weighted: use_w,
        }
    }

    fn distinct_m(&self) -> usize {
        let mut m = self.ms.clone();
        m.sort_unstable();
        m.dedup();
        m.len()
    }
}

fn check_data(data: &Data, n_params: usize) -> Result<()> {
    if data.distinct_m() < n_params + 1 {
        return Err(Error::InsufficientData(format!(
            "{} distinct lengths for {} parameters",
            data.distinct_m(),
            n_params
        )));
    }
    if data.ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::InsufficientData("non-finite mean".into()));
    }
    Ok(())
}

fn is_constant(ys: &[f64]) -> bool {
    let (lo, hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| {
            (a.min(y), b.max(y))
        });
    hi - lo <= 1e-14 * hi.abs().max(1.0)
}

/// Log-linear regression of `ln(mean)` on `m - 1`, over points with positive
/// mean: `s0 = exp(slope)`, `A0 = exp(intercept)`.
pub fn init_single_exp(ds: &DecayDataset) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = ds
        .points
        .iter()
        .filter(|p| p.mean > 0.0)
        .map(|p| ((p.m - 1) as f64, p.mean.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData(
            "need positive means at two or more lengths".into(),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "need two or more distinct lengths".into(),
        ));
    }
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok((intercept.exp(), slope.exp().clamp(-1.0, 1.0)))
}

/// Weighted linear least squares `y ≈ b f(m) + c g(m)` for fixed basis
/// functions; returns `(b, c, ssr)`.
fn linear_pair(data: &Data, basis: impl Fn(usize) -> (f64, f64)) -> (f64, f64, f64) {
    let (mut s00, mut s01, mut s11, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&m, &y), &w) in data.ms.iter().zip(&data.ys).zip(&data.ws) {
        let (f, g) = basis(m);
        s00 += w * f * f;
        s01 += w * f * g;
        s11 += w * g * g;
        t0 += w * f * y;
        t1 += w * g * y;
    }
    let det = s00 * s11 - s01 * s01;
    let (b, c) = if det.abs() > 1e-14 * (s00 * s11).abs().max(1e-300) {
        ((t0 * s11 - s01 * t1) / det, (s00 * t1 - s01 * t0) / det)
    } else if s00 > 0.0 {
        (t0 / s00, 0.0)
    } else {
        (0.0, 0.0)
    };
    let ssr = data
        .ms
        .iter()
        .zip(&data.ys)
        .zip(&data.ws)
        .map(|((&m, &y), &w)| {
            let (f, g) = basis(m);
            w * (y - b * f - c * g).powi(2)
        })
        .sum();
    (b, c, ssr)
}

/// `y ≈ b λ^x + c` at fixed `λ`; returns `(b, c, ssr)`.
fn linear_for_lambda(data: &Data, lambda: f64) -> (f64, f64, f64) {
    linear_pair(data, |m| (lambda.powi(m as i32 - 1), 1.0))
}

/// Separable scan for `b λ1^x + c λ2^x` over pairs `λ1 > λ2`: a log-spaced
/// grid in `1 - λ` (plus `λ = 1`), then a simplex search in `ln(1 - λ)`. Returns
/// `(b, c, λ1, λ2)`.
fn init_two_decays(data: &Data) -> (f64, f64, f64, f64) {
    let ssr =
        |l1: f64, l2: f64| linear_pair(data, |m| (l1.powi(m as i32 - 1), l2.powi(m as i32 - 1))).2;
    let mut grid = vec![1.0];
    grid.extend((0..=60).map(|i| 1.0 - 10f64.powf(-5.0 + 5.0 * i as f64 / 60.0)));
    let mut best = (f64::INFINITY, 1.0, 0.5);
    for (i, &l1) in grid.iter().enumerate() {
        for &l2 in &grid[i + 1..] {
            let v = ssr(l1, l2);
            if v < best.0 {
                best = (v, l1, l2);
            }
        }
    }
    // refine in u = ln(1 - λ) with a simplex search on the reduced problem
    if best.1 < 1.0 {
        // λ >= 0: with only odd or only even exponents the sign of a decay is
        // not identifiable, and nonnegative decays are the physical branch
        let to_l = |u: f64| 1.0 - u.min(0.0).exp();
        let f = |u: [f64; 2]| {
            let (l1, l2) = (to_l(u[0]), to_l(u[1]));
            if l1 <= l2 {
                f64::INFINITY
            } else {
                ssr(l1, l2)
            }
        };
        let u0 = [(1.0 - best.1).ln(), (1.0 - best.2).ln()];
        let u = nelder_mead_2d(f, u0, 0.2);
        let v = f(u);
        if v < best.0 {
            best = (v, to_l(u[0]), to_l(u[1]));
        }
    }
    let (_, l1, l2) = best;
    let (b, c, _) = linear_pair(data, |m| (l1.powi(m as i32 - 1), l2.powi(m as i32 - 1)));
    (b, c, l1, l2)
}

/// Separable scan for `b λ^x + c`: a log-spaced grid in `1 - λ`, then a golden
/// section refinement around the best grid point. Returns `(b, c, λ)`.
fn init_constant_plus_exp(data: &Data) -> (f64, f64, f64) {
    const N: usize = 400;
    let grid: Vec<f64> = (0..=N)
        .map(|i| 1.0 - 10f64.powf(-7.0 + 7.0 * i as f64 / N as f64))
        .collect();
    let ssr_at = |l: f64| linear_for_lambda(data, l).2;
    let best = (0..grid.len())
        .min_by(|&i, &j| ssr_at(grid[i]).total_cmp(&ssr_at(grid[j])))
        .unwrap();
    // grid is decreasing in λ; bracket by neighbours
    let hi = if best == 0 { 1.0 } else { grid[best - 1] };
    let lo = if best + 1 < grid.len() {
        grid[best + 1]
    } else {
        0.0
    };
    let (mut a, mut b) = (lo, hi);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (ssr_at(x1), ssr_at(x2));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = ssr_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = ssr_at(x2);
        }
    }
    let mut lambda = 0.5 * (a + b);
    if ssr_at(grid[best]) < ssr_at(lambda) {
        lambda = grid[best];
    }
    let (bb, cc, _) = linear_for_lambda(data, lambda);
    (bb, cc, lambda)
}

/// Nelder-Mead on a 2-D function; returns the best vertex.
fn nelder_mead_2d(f: impl Fn([f64; 2]) -> f64, x0: [f64; 2], step: f64) -> [f64; 2] {
    let mut pts = [x0, [x0[0] + step, x0[1]], [x0[0], x0[1] + step]];
    let mut vals = pts.map(&f);
    for _ in 0..2000 {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.map(|i| pts[i]);
        vals = idx.map(|i| vals[i]);
        let size = (pts[1][0] - pts[0][0])
            .abs()
            .max((pts[1][1] - pts[0][1]).abs())
            + (pts[2][0] - pts[0][0])
                .abs()
                .max((pts[2][1] - pts[0][1]).abs());
        if size < 1e-13 {
            break;
        }
        let c = [(pts[0][0] + pts[1][0]) / 2.0, (pts[0][1] + pts[1][1]) / 2.0];
        let along = |t: f64| [c[0] + t * (pts[2][0] - c[0]), c[1] + t * (pts[2][1] - c[1])];
        let r = along(-1.0);
        let fr = f(r);
        if fr < vals[0] {
            let e = along(-2.0);
            let fe = f(e);
            (pts[2], vals[2]) = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < vals[1] {
            (pts[2], vals[2]) = (r, fr);
        } else {
            let k = if fr < vals[2] {
                along(-0.5)
            } else {
                along(0.5)
            };
            let fk = f(k);
            if fk < vals[2].min(fr) {
                (pts[2], vals[2]) = (k, fk);
            } else {
                for i in 1..3 {
                    pts[i] = [(pts[i][0] + pts[0][0]) / 2.0, (pts[i][1] + pts[0][1]) / 2.0];
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    let i = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    pts[i]
}

/// Initial values for `B λ+^x + C λ-^x` under the near trace-preserving prior
/// `λ+ = 1`: `B0` is the asymptote, `(C0, λ-0)` the decaying part, all from a
/// separable scan of `b λ^x + c`.
pub fn init_double_exp(ds: &DecayDataset) -> Result<(f64, f64, f64, f64)> {
    let data = Data::new(ds, true);
    if data.distinct_m() < 5 {
        return Err(Error::InsufficientData(
            "double-exp initialization needs 5 distinct lengths".into(),
        ));
    }
    let (b, c, l) = init_constant_plus_exp(&data);
    Ok((c, b, 1.0, l))
}

/// Initial values `(B0, C0, λ0)` for `B λ^x + C`.
pub fn init_tp_constrained(ds: &DecayDataset) -> Result<(f64, f64, f64)> {
    let data = Data::new(ds, true);
    if data.distinct_m() < 4 {
        return Err(Error::InsufficientData(
            "tp-constrained initialization needs 4 distinct lengths".into(),
        ));
    }
    Ok(init_constant_plus_exp(&data))
}

struct LmOutcome {
    params: Vec<f64>,
    jtwj: DMatrix<f64>,
    cost: f64,
    iterations: usize,
}

fn residuals_and_jacobian(
    model: ModelKind,
    data: &Data,
    x: &[f64],
) -> (DVector<f64>, DMatrix<f64>) {
    let n = data.ms.len();
    let p = model.n_params();
    let mut r = DVector::zeros(n);
    let mut j = DMatrix::zeros(n, p);
    for (i, (&m, &y)) in data.ms.iter().zip(&data.ys).enumerate() {
        let sw = data.ws[i].sqrt();
        r[i] = sw * (y - model.predict(x, m));
        for (k, g) in model.gradient(x, m).into_iter().enumerate() {
            j[(i, k)] = sw * g;
        }
    }
    (r, j)
}

fn clamp_params(model: ModelKind, x: &mut [f64]) {
    for &i in model.decay_indices() {
        x[i] = x[i].clamp(-1.0, 1.0);
    }
}

fn levenberg_marquardt(
    model: ModelKind,
    data: &Data,
    x0: Vec<f64>,
    opts: &FitOptions,
) -> Result<LmOutcome> {
    let mut x = x0;
    clamp_params(model, &mut x);
    let (mut r, mut j) = residuals_and_jacobian(model, data, &x);
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    let p = x.len();
    for iter in 1..=opts.max_iterations {
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut accepted = false;
        while mu <= 1e20 {
            let mut a = jtj.clone();
            for k in 0..p {
                a[(k, k)] += mu * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a
                .clone()
                .cholesky()
                .map(|c| c.solve(&g))
                .or_else(|| a.lu().solve(&g))
            else {
                mu *= 10.0;
                continue;
            };
            let mut xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            clamp_params(model, &mut xn);
            let (rn, jn) = residuals_and_jacobian(model, data, &xn);
            let cn = rn.norm_squared();
            if cn.is_finite() && cn <= cost {
                let moved = x
                    .iter()
                    .zip(&xn)
                    .map(|(a, b)| (a - b).abs() / (a.abs() + opts.step_tolerance))
                    .fold(0.0, f64::max);
                x = xn;
                r = rn;
                j = jn;
                cost = cn;
                mu = (mu / 10.0).max(1e-15);
                accepted = true;
                if moved < opts.step_tolerance || cost == 0.0 {
                    let jtwj = j.transpose() * &j;
                    return Ok(LmOutcome {
                        params: x,
                        jtwj,
                        cost,
                        iterations: iter,
                    });
                }
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            // no decrease even for vanishing steps: stationary to precision
            let jtwj = j.transpose() * &j;
            return Ok(LmOutcome {
                params: x,
                jtwj,
                cost,
                iterations: iter,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        reason: format!("params {x:?}, weighted cost {cost:.6e}"),
    })
}

fn finish(model: ModelKind, data: &Data, out: LmOutcome, degenerate: bool) -> FitResult {
    let n = data.ms.len();
    let p = model.n_params();
    let dof = n.saturating_sub(p);
    let chi2_dof = (dof > 0).then(|| out.cost / dof as f64);
    let scale = chi2_dof.unwrap_or(0.0);
    let cov = out
        .jtwj
        .clone()
        .try_inverse()
        .map(|inv| inv * scale)
        .unwrap_or_else(|| DMatrix::from_element(p, p, f64::NAN));
    let stderr = (0..p).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let residuals: Vec<f64> = data
        .ms
        .iter()
        .zip(&data.ys)
        .map(|(&m, &y)| y - model.predict(&out.params, m))
        .collect();
    FitResult {
        model,
        names: model.param_names().iter().map(|s| s.to_string()).collect(),
        params: out.params,
        stderr,
        covariance: (0..p)
            .map(|i| (0..p).map(|k| cov[(i, k)]).collect())
            .collect(),
        r2: r_squared(&data.ys, &residuals),
        chi2_dof,
        residuals,
        weighted: data.weighted,
        iterations: out.iterations,
        converged: true,
        degenerate,
    }
}

fn r_squared(ys: &[f64], residuals: &[f64]) -> Option<f64> {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot <= 0.0 || is_constant(ys) {
        return None;
    }
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    Some(1.0 - ss_res / ss_tot)
}

/// Flat data: only the level is identifiable.
fn constant_fit(model: ModelKind, data: &Data) -> FitResult {
    let level = data.ys.iter().sum::<f64>() / data.ys.len() as f64;
    let params = match model {
        ModelKind::SingleExp => vec![level, 1.0],
        ModelKind::DoubleExp => vec![level, 0.0, 1.0, f64::NAN],
        ModelKind::TpConstrained => vec![0.0, level, f64::NAN],
    };
    let p = model.n_params();
    let residuals: Vec<f64> = data.ys.iter().map(|y| y - level).collect();
    FitResult {
        model,
        names: model.param_names().iter().map(|s| s.to_string()).collect(),
        params,
        stderr: vec![0.0; p],
        covariance: vec![vec![0.0; p]; p],
        r2: None,
        chi2_dof: None,
        residuals,
        weighted: data.weighted,
        iterations: 0,
        converged: true,
        degenerate: !matches!(model, ModelKind::SingleExp),
    }
}

pub fn fit(model: ModelKind, ds: &DecayDataset) -> Result<FitResult> {
    fit_with(model, ds, &FitOptions::default())
}

pub fn fit_with(model: ModelKind, ds: &DecayDataset, opts: &FitOptions) -> Result<FitResult> {
    let data = Data::new(ds, opts.weighted);
    check_data(&data, model.n_params())?;
    if data.ys.iter().any(|&y| y > 1.0 + 1e-9 || y < -1e-9) {
        return Err(Error::InsufficientData("means must lie in [0, 1]".into()));
    }
    if is_constant(&data.ys) {
        return Ok(constant_fit(model, &data));
    }
    match model {
        ModelKind::SingleExp => {
            let (a0, s0) = init_single_exp(ds)?;
            let out = levenberg_marquardt(model, &data, vec![a0, s0], opts)?;
            Ok(finish(model, &data, out, false))
        }
        ModelKind::TpConstrained => {
            let (b0, c0, l0) = init_constant_plus_exp(&data);
            let out = levenberg_marquardt(model, &data, vec![b0, c0, l0], opts)?;
            Ok(finish(model, &data, out, false))
        }
        ModelKind::DoubleExp => fit_double(&data, opts),
    }
}

fn fit_double(data: &Data, opts: &FitOptions) -> Result<FitResult> {
    let model = ModelKind::DoubleExp;
    // two starts: the near trace-preserving prior λ+ = 1, and a free scan
    let (b, c, l) = init_constant_plus_exp(data);
    let starts = [vec![c, b, 1.0, l], {
        let (b, c, l1, l2) = init_two_decays(data);
        vec![b, c, l1, l2]
    }];
    let mut best: Option<LmOutcome> = None;
    let mut first_err = None;
    for x0 in starts {
        match levenberg_marquardt(model, data, x0, opts) {
            Ok(out) if best.as_ref().is_none_or(|b| out.cost < b.cost) => best = Some(out),
            Ok(_) => {}
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let out = match (best, first_err) {
        (Some(out), _) => out,
        (None, Some(e)) => return Err(e),
        (None, None) => unreachable!("at least one start"),
    };
    let mut res = finish(model, data, out, false);
    // canonical labelling λ+ >= λ-
    if res.params[2] < res.params[3] {
        res.params.swap(0, 1);
        res.params.swap(2, 3);
        res.stderr.swap(0, 1);
        res.stderr.swap(2, 3);
        let perm = [1, 0, 3, 2];
        let cov = res.covariance.clone();
        for i in 0..4 {
            for k in 0..4 {
                res.covariance[i][k] = cov[perm[i]][perm[k]];
            }
        }
    }
    let (b, c) = (res.params[0].abs(), res.params[1].abs());
    let vanishing = b.min(c) < 1e-8 * (b + c);
    if vanishing || (res.params[2] - res.params[3]).abs() < DEGENERACY_GAP {
        // collapse to (B + C) λ^x
        let amp = res.params[0] + res.params[1];
        let lambda = if !vanishing {
            0.5 * (res.params[2] + res.params[3])
        } else if b > c {
            res.params[2]
        } else {
            res.params[3]
        };
        let collapsed = Data {
            ms: data.ms.clone(),
            ys: data.ys.clone(),
            ws: data.ws.clone(),
            weighted: data.weighted,
        };
        let out = levenberg_marquardt(ModelKind::SingleExp, &collapsed, vec![amp, lambda], opts)?;
        let one = finish(ModelKind::SingleExp, &collapsed, out, true);
        res.params = vec![one.params[0], 0.0, one.params[1], one.params[1]];
        res.stderr = vec![one.stderr[0], 0.0, one.stderr[1], one.stderr[1]];
        let mut cov = vec![vec![0.0; 4]; 4];
        cov[0][0] = one.covariance[0][0];
        cov[0][2] = one.covariance[0][1];
        cov[2][0] = one.covariance[1][0];
        cov[2][2] = one.covariance[1][1];
        res.covariance = cov;
        res.residuals = one.residuals;
        res.r2 = one.r2;
        res.chi2_dof = one.chi2_dof;
        res.degenerate = true;
    }
    Ok(res)
}

/// r² on unweighted residuals and weighted χ² per degree of freedom.
pub fn goodness(fit: &FitResult, ds: &DecayDataset) -> Result<Goodness> {
    if !fit.converged {
        return Err(Error::NoConvergence {
            iterations: fit.iterations,
            reason: "goodness of an unconverged fit".into(),
        });
    }
    let data = Data::new(ds, fit.weighted);
    let residuals: Vec<f64> = data
        .ms
        .iter()
        .zip(&data.ys)
        .map(|(&m, &y)| y - fit.predict(m))
        .collect();
    let chi2: f64 = residuals.iter().zip(&data.ws).map(|(r, w)| w * r * r).sum();
    let dof = data.ms.len().saturating_sub(fit.model.n_params());
    Ok(Goodness {
        r2: r_squared(&data.ys, &residuals),
        chi2_dof: (dof > 0).then(|| chi2 / dof as f64),
    })
}
