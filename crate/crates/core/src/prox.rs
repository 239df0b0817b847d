//! Scalar proximal maps of the nonconvex sparsity penalties.
//!
//! Every routine here minimizes the one-dimensional model
//!
//! ```text
//! h_{q,s}(u) = -q u + u^2 / 2 + s g(u),      |u| <= b,
//! ```
//!
//! which differs from `(u - q)^2 / 2 + s g(u)` only by the constant `q^2 / 2`.
//! With this normalization `h_{q,s}(0) = 0`, so a nonzero minimizer has to
//! reach a strictly negative objective to beat the zero candidate.
//!
//! All penalties are symmetric, so the work is done for `|q|` and the sign is
//! restored at the end. This makes `prox(-q) = -prox(q)` hold bit for bit.

use crate::error::{param, Error, Result};

/// Objective gap below which two candidates count as tied.
pub const OBJECTIVE_TIE_TOL: f64 = 1e-14;

/// Absolute tolerance on the nonzero root of the `|u|^p` stationarity equation.
pub const LP_ROOT_TOL: f64 = 1e-12;

const LP_NEWTON_STEPS: usize = 50;
const BISECTION_STEPS: usize = 200;

/// The scalar penalty `g`, without the box and without the weight `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyKind {
    /// `|u|_0`: 1 for `u != 0`, 0 at the origin.
    L0,
    /// `|u|^p` with `0 < p < 1`.
    LpPower { p: f64 },
    /// `ln(1 + slope |u|)`.
    Log { slope: f64 },
    /// Indicator of the integers.
    IntegerIndicator,
}

/// Penalty together with the box bound and the two weights of the objective
/// `f(u) + alpha/2 ||u||^2 + beta * int g(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    /// `b` in `|u| <= b`; `f64::INFINITY` for no box.
    pub box_bound: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, box_bound: f64, alpha: f64, beta: f64) -> Result<Self> {
        let spec = Self {
            kind,
            box_bound,
            alpha,
            beta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn l0(box_bound: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(PenaltyKind::L0, box_bound, alpha, beta)
    }

    pub fn lp(p: f64, box_bound: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(PenaltyKind::LpPower { p }, box_bound, alpha, beta)
    }

    pub fn log(slope: f64, box_bound: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(PenaltyKind::Log { slope }, box_bound, alpha, beta)
    }

    pub fn integer(box_bound: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(PenaltyKind::IntegerIndicator, box_bound, alpha, beta)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PenaltyKind::LpPower { p } if !(p > 0.0 && p < 1.0) => {
                return param(format!("exponent p must lie in (0, 1), got {p}"))
            }
            PenaltyKind::Log { slope } if !(slope > 0.0 && slope.is_finite()) => {
                return param(format!("log slope must be positive and finite, got {slope}"))
            }
            _ => {}
        }
        if !(self.box_bound > 0.0) {
            return param(format!("box bound must be positive, got {}", self.box_bound));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return param(format!("alpha must be finite and >= 0, got {}", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return param(format!("beta must be finite and >= 0, got {}", self.beta));
        }
        Ok(())
    }

    /// The unweighted penalty including the box indicator; `+inf` off the domain.
    pub fn g(&self, u: f64) -> f64 {
        let a = u.abs();
        if a > self.box_bound {
            return f64::INFINITY;
        }
        match self.kind {
            PenaltyKind::L0 => {
                if a == 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            PenaltyKind::LpPower { p } => {
                if a == 0.0 {
                    0.0
                } else {
                    a.powf(p)
                }
            }
            PenaltyKind::Log { slope } => (slope * a).ln_1p(),
            PenaltyKind::IntegerIndicator => {
                if u.fract() == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `g(a) - g(b)` evaluated without cancellation when `a` and `b` are close.
    pub fn g_difference(&self, a: f64, b: f64) -> f64 {
        let (ga, gb) = (self.g(a), self.g(b));
        if ga.is_infinite() || gb.is_infinite() || a == 0.0 || b == 0.0 {
            return ga - gb;
        }
        let (ma, mb) = (a.abs(), b.abs());
        match self.kind {
            PenaltyKind::LpPower { p } => gb * (p * ((ma - mb) / mb).ln_1p()).exp_m1(),
            PenaltyKind::Log { slope } => (slope * (ma - mb) / (1.0 + slope * mb)).ln_1p(),
            PenaltyKind::L0 | PenaltyKind::IntegerIndicator => ga - gb,
        }
    }

    /// Exponent used for the `N_p` column and the inflection bound, if any.
    pub fn exponent(&self) -> Option<f64> {
        match self.kind {
            PenaltyKind::LpPower { p } => Some(p),
            _ => None,
        }
    }
}

/// Which candidate produced the prox value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Zero,
    Interior,
    AtBound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxResult {
    pub value: f64,
    /// `h_{q,s}(value)`; never positive.
    pub objective: f64,
    /// Another candidate of larger magnitude reached the same objective.
    pub tie: bool,
    pub branch: Branch,
}

/// Constants describing the sparsity structure of `prox_{s g}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityConstants {
    /// Every nonzero prox output has magnitude at least `u0`.
    pub u0: f64,
    /// `prox(q) = 0` for `|q| < q0`, nonzero for `|q| > q0`.
    pub q0: f64,
    /// Inflection point of `u^2/2 + s u^p` (power penalty only).
    pub u_inflection: Option<f64>,
}

/// `h_{q,s}(u) = -q u + u^2/2 + s g(u)`.
pub fn model_objective(q: f64, s: f64, pen: &PenaltySpec, u: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    let g = pen.g(u);
    if g.is_infinite() {
        return f64::INFINITY;
    }
    let weighted = if s == 0.0 { 0.0 } else { s * g };
    -q * u + 0.5 * u * u + weighted
}

fn check_scalar_args(q: f64, s: f64) -> Result<()> {
    if !q.is_finite() {
        return param(format!("prox argument must be finite, got {q}"));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return param(format!("prox weight s must be finite and >= 0, got {s}"));
    }
    Ok(())
}

fn branch_of(value: f64, b: f64) -> Branch {
    if value == 0.0 {
        Branch::Zero
    } else if value.abs() == b {
        Branch::AtBound
    } else {
        Branch::Interior
    }
}

/// Picks the best of a set of nonnegative candidates for the model with
/// argument `a >= 0`, breaking ties toward smaller magnitude.
fn select_candidate(a: f64, s: f64, pen: &PenaltySpec, candidates: &[f64]) -> ProxResult {
    let mut scored: Vec<(f64, f64)> = candidates
        .iter()
        .map(|&u| (u, model_objective(a, s, pen, u)))
        .collect();
    scored.sort_by(|x, y| x.0.total_cmp(&y.0));
    let best = scored
        .iter()
        .map(|c| c.1)
        .fold(f64::INFINITY, f64::min);
    let (value, objective) = *scored
        .iter()
        .find(|c| c.1 <= best + OBJECTIVE_TIE_TOL)
        .expect("candidate list always contains zero");
    let tie = scored
        .iter()
        .any(|c| c.0 != value && c.1 <= best + OBJECTIVE_TIE_TOL);
    ProxResult {
        value,
        objective,
        tie,
        branch: branch_of(value, pen.box_bound),
    }
}

fn with_sign(q: f64, r: ProxResult) -> ProxResult {
    if q < 0.0 && r.value != 0.0 {
        ProxResult {
            value: -r.value,
            ..r
        }
    } else {
        r
    }
}

/// Projection onto the box; the prox of a vanishing penalty.
fn prox_box_only(q: f64, b: f64) -> ProxResult {
    let value = q.clamp(-b, b);
    ProxResult {
        value,
        objective: -q * value + 0.5 * value * value,
        tie: false,
        branch: branch_of(value, b),
    }
}

/// Global minimizer of `u -> (u - q)^2 / 2 + s g(u)` over `|u| <= b`.
pub fn prox_scalar(q: f64, s: f64, pen: &PenaltySpec) -> Result<ProxResult> {
    pen.validate()?;
    check_scalar_args(q, s)?;
    let b = pen.box_bound;
    match pen.kind {
        PenaltyKind::IntegerIndicator => Ok(prox_integer(q, b)),
        _ if s == 0.0 => Ok(prox_box_only(q, b)),
        PenaltyKind::L0 => Ok(prox_l0(q, s, b)),
        PenaltyKind::LpPower { p } => prox_lp(q, s, p, b),
        PenaltyKind::Log { slope } => Ok(prox_log(q, s, slope, b)),
    }
}

/// Hard thresholding: `0` for `|q| <= sqrt(2 s)`, `q` above, clipped to the box
/// when the box is active.
pub fn prox_l0(q: f64, s: f64, b: f64) -> ProxResult {
    let pen = PenaltySpec {
        kind: PenaltyKind::L0,
        box_bound: b,
        alpha: 0.0,
        beta: 0.0,
    };
    let a = q.abs();
    if a > b {
        return with_sign(q, select_candidate(a, s, &pen, &[0.0, b]));
    }
    let threshold = (2.0 * s).sqrt();
    let r = if a < threshold {
        ProxResult {
            value: 0.0,
            objective: 0.0,
            tie: false,
            branch: Branch::Zero,
        }
    } else if a == threshold {
        ProxResult {
            value: 0.0,
            objective: 0.0,
            tie: true,
            branch: Branch::Zero,
        }
    } else {
        ProxResult {
            value: a,
            objective: -0.5 * a * a + s,
            tie: false,
            branch: branch_of(a, b),
        }
    };
    with_sign(q, r)
}

/// Inflection point of `u -> u^2/2 + s u^p` on `(0, inf)`.
pub fn compute_u_inflection(s: f64, p: f64) -> f64 {
    (s * p * (1.0 - p)).powf(1.0 / (2.0 - p))
}

/// Largest root of `u - a + s p u^(p-1) = 0`, if any. The left side is convex
/// and increasing on `[u_I, inf)`, negative at `u_I` whenever a root exists,
/// and positive at `a`, so Newton started at `a` descends monotonically.
fn lp_stationary_root(a: f64, s: f64, p: f64) -> Result<Option<f64>> {
    let u_infl = compute_u_inflection(s, p);
    let phi = |u: f64| u - a + s * p * u.powf(p - 1.0);
    let dphi = |u: f64| 1.0 - s * p * (1.0 - p) * u.powf(p - 2.0);
    if a <= u_infl {
        return Ok(None);
    }
    let at_infl = phi(u_infl);
    if at_infl > 0.0 {
        return Ok(None);
    }
    if at_infl == 0.0 {
        return Ok(Some(u_infl));
    }
    let (mut lo, mut hi) = (u_infl, a);
    let mut u = a;
    for _ in 0..LP_NEWTON_STEPS {
        let f = phi(u);
        if f == 0.0 {
            return Ok(Some(u));
        }
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let d = dphi(u);
        let mut next = u - f / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= LP_ROOT_TOL {
            return Ok(Some(next));
        }
        u = next;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= LP_ROOT_TOL {
            return Ok(Some(mid));
        }
        if phi(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::Numeric(format!(
        "power-penalty root did not converge for a={a}, s={s}, p={p}"
    )))
}

/// Prox of `s |u|^p` on `[-b, b]`.
pub fn prox_lp(q: f64, s: f64, p: f64, b: f64) -> Result<ProxResult> {
    let pen = PenaltySpec {
        kind: PenaltyKind::LpPower { p },
        box_bound: b,
        alpha: 0.0,
        beta: 0.0,
    };
    pen.validate()?;
    check_scalar_args(q, s)?;
    if s == 0.0 {
        return Ok(prox_box_only(q, b));
    }
    let a = q.abs();
    let mut candidates = vec![0.0];
    if a > 0.0 {
        if let Some(r) = lp_stationary_root(a, s, p)? {
            if r <= b {
                candidates.push(r);
            }
        }
        if b.is_finite() {
            candidates.push(b);
        }
    }
    Ok(with_sign(q, select_candidate(a, s, &pen, &candidates)))
}

/// Prox of `s ln(1 + slope |u|)` on `[-b, b]`.
///
/// For `q > 0` the stationary points solve
/// `slope u^2 + (1 - slope q) u + (s slope - q) = 0`.
pub fn prox_log(q: f64, s: f64, slope: f64, b: f64) -> ProxResult {
    let pen = PenaltySpec {
        kind: PenaltyKind::Log { slope },
        box_bound: b,
        alpha: 0.0,
        beta: 0.0,
    };
    let a = q.abs();
    let mut candidates = vec![0.0];
    if a > 0.0 {
        let (qa, qb, qc) = (slope, 1.0 - slope * a, s * slope - a);
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            // stable form: avoid cancellation in the smaller root
            let t = -0.5 * (qb + qb.signum() * disc.sqrt());
            let mut roots = vec![t / qa];
            if t != 0.0 {
                roots.push(qc / t);
            }
            candidates.extend(roots.into_iter().filter(|&r| r > 0.0 && r <= b));
        }
        if b.is_finite() {
            candidates.push(b);
        }
    }
    with_sign(q, select_candidate(a, s, &pen, &candidates))
}

/// Nearest integer in `[-b, b]`; half-integers round toward zero and are
/// flagged as ties.
pub fn prox_integer(q: f64, b: f64) -> ProxResult {
    let a = q.abs();
    let lower = a.floor();
    let frac = a - lower;
    let (mut v, mut tie) = if frac > 0.5 {
        (lower + 1.0, false)
    } else {
        (lower, frac == 0.5)
    };
    let cap = b.floor();
    if v > cap {
        v = cap;
        tie = false;
    }
    let value = if q < 0.0 && v != 0.0 { -v } else { v };
    ProxResult {
        value,
        objective: -q * value + 0.5 * value * value,
        tie,
        branch: branch_of(value, b),
    }
}

/// `chi(r) = s ln(1 + c r) - s c r / (1 + c r) - r^2 / 2`: the value of the
/// log model at a stationary point `r`. Nonzero prox outputs satisfy
/// `chi(r) <= 0`; `chi` rises on `(0, r_c)` and falls afterwards.
fn log_gap_root(s: f64, slope: f64) -> Option<f64> {
    if s * slope * slope <= 1.0 {
        return None;
    }
    let chi = |r: f64| {
        let t = slope * r;
        s * t.ln_1p() - s * t / (1.0 + t) - 0.5 * r * r
    };
    let r_c = ((s.sqrt() * slope) - 1.0) / slope;
    let mut lo = r_c;
    let mut hi = r_c.max(1.0);
    while chi(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// Lower bound on the magnitude of every nonzero output of `prox_{s g}`.
pub fn compute_u0(s: f64, pen: &PenaltySpec) -> Result<f64> {
    pen.validate()?;
    check_scalar_args(0.0, s)?;
    let b = pen.box_bound;
    if let PenaltyKind::IntegerIndicator = pen.kind {
        return Ok(1.0);
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let u0 = match pen.kind {
        PenaltyKind::L0 => (2.0 * s).sqrt(),
        PenaltyKind::LpPower { p } => (2.0 * s * (1.0 - p)).powf(1.0 / (2.0 - p)),
        PenaltyKind::Log { slope } => log_gap_root(s, slope).unwrap_or(0.0),
        PenaltyKind::IntegerIndicator => unreachable!(),
    };
    Ok(u0.min(b))
}

/// `q0 = inf_{0 < u <= b} (u^2/2 + s g(u)) / u`: the threshold below which
/// zero is the unique prox output.
pub fn compute_q0(s: f64, pen: &PenaltySpec) -> Result<f64> {
    pen.validate()?;
    check_scalar_args(0.0, s)?;
    let b = pen.box_bound;
    if let PenaltyKind::IntegerIndicator = pen.kind {
        return Ok(if b >= 1.0 { 0.5 } else { f64::INFINITY });
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    if let PenaltyKind::Log { slope } = pen.kind {
        if s * slope * slope <= 1.0 {
            // the ratio is increasing; its infimum is the limit at 0+
            return Ok(s * slope);
        }
    }
    let u = compute_u0(s, pen)?;
    Ok(0.5 * u + s * pen.g(u) / u)
}

pub fn sparsity_constants(s: f64, pen: &PenaltySpec) -> Result<SparsityConstants> {
    Ok(SparsityConstants {
        u0: compute_u0(s, pen)?,
        q0: compute_q0(s, pen)?,
        u_inflection: pen.exponent().map(|p| compute_u_inflection(s, p)),
    })
}

/// True iff `L <= (2/p - 1) alpha`, the parameter regime in which the nonzero
/// branch of the stationarity map is single valued.
pub fn check_strong_conv_condition(lipschitz: f64, alpha: f64, p: f64) -> bool {
    lipschitz <= (2.0 / p - 1.0) * alpha
}

/// Verification oracle: dense scan of the model over the growth-bounded range
/// `|u| <= min(b, 2|q| + 1)` followed by golden-section refinement.
pub fn brute_force_prox(
    q: f64,
    s: f64,
    pen: &PenaltySpec,
    grid_n: usize,
    refine_tol: f64,
) -> f64 {
    let h = |u: f64| model_objective(q, s, pen, u);
    let radius = pen.box_bound.min(2.0 * q.abs() + 1.0);

    let mut candidates: Vec<f64> = vec![0.0];
    if let PenaltyKind::IntegerIndicator = pen.kind {
        let k = radius.floor() as i64;
        candidates.extend((-k..=k).filter(|&i| i != 0).map(|i| i as f64));
    } else {
        let n = grid_n.max(1000);
        let step = 2.0 * radius / n as f64;
        let mut best_u = radius;
        let mut best_h = f64::INFINITY;
        for i in 0..=n {
            let u = -radius + step * i as f64;
            let v = h(u);
            if u != 0.0 && v < best_h {
                best_h = v;
                best_u = u;
            }
        }
        for edge in [-radius, radius] {
            if h(edge) < best_h {
                best_h = h(edge);
                best_u = edge;
            }
        }
        // refine on the side of the origin holding the grid minimizer
        let (lo, hi) = if best_u > 0.0 {
            ((best_u - step).max(0.0), (best_u + step).min(radius))
        } else {
            ((best_u - step).max(-radius), (best_u + step).min(0.0))
        };
        let refined = golden_section(h, lo, hi, refine_tol);
        candidates.push(best_u);
        candidates.push(refined);
        candidates.push(radius);
        candidates.push(-radius);
    }

    let best = candidates.iter().map(|&u| h(u)).fold(f64::INFINITY, f64::min);
    let mut winner = f64::INFINITY;
    for &u in &candidates {
        if h(u) <= best + OBJECTIVE_TIE_TOL && u.abs() < winner.abs() {
            winner = u;
        }
    }
    winner
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
        if x1 == x2 {
            break;
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn penalty_difference_is_accurate() {
        let lp = PenaltySpec::lp(0.5, 4.0, 0.01, 0.01).unwrap();
        let (a, b) = (1.0 + 1e-12, 1.0);
        let gap = a - b;
        assert!((lp.g_difference(a, b) - 0.5 * gap).abs() < 1e-10 * gap);
        let log = PenaltySpec::log(2.0, 4.0, 0.01, 0.01).unwrap();
        assert!((log.g_difference(a, b) - 2.0 * gap / 3.0).abs() < 1e-10 * gap);
        assert_eq!(lp.g_difference(0.0, 1.0), -1.0);
        assert_eq!(lp.g_difference(1.0, 5.0), f64::NEG_INFINITY);
    }

    use super::*;
    use approx::assert_abs_diff_eq;

    fn lp(p: f64, b: f64) -> PenaltySpec {
        PenaltySpec::lp(p, b, 0.0, 1.0).unwrap()
    }

    #[test]
    fn hard_threshold_examples() {
        let inf = f64::INFINITY;
        assert_eq!(prox_l0(1.5, 0.5, inf).value, 1.5);
        let at = prox_l0(1.0, 0.5, inf);
        assert_eq!(at.value, 0.0);
        assert!(at.tie);
        assert_eq!(prox_l0(-3.0, 0.5, inf).value, -3.0);
        assert_eq!(prox_l0(0.99, 0.5, inf).value, 0.0);
    }

    #[test]
    fn zero_argument_gives_zero() {
        let inf = f64::INFINITY;
        for pen in [
            PenaltySpec::l0(inf, 0.0, 1.0).unwrap(),
            lp(0.5, inf),
            PenaltySpec::log(1.0, inf, 0.0, 1.0).unwrap(),
            PenaltySpec::integer(inf, 0.0, 1.0).unwrap(),
        ] {
            let r = prox_scalar(0.0, 1.0, &pen).unwrap();
            assert_eq!(r.value, 0.0);
            assert_eq!(r.branch, Branch::Zero);
        }
    }

    #[test]
    fn lp_stationary_branch() {
        let r = prox_lp(2.0, 1.0, 0.5, f64::INFINITY).unwrap();
        assert_eq!(r.branch, Branch::Interior);
        let u = r.value;
        assert!(u > compute_u_inflection(1.0, 0.5) && u <= 2.0);
        assert_abs_diff_eq!(u - 2.0 + 0.5 * u.powf(-0.5), 0.0, epsilon = 1e-11);
    }

    #[test]
    fn lp_small_argument_is_zero() {
        assert_eq!(prox_lp(0.05, 1.0, 0.5, f64::INFINITY).unwrap().value, 0.0);
    }

    #[test]
    fn lp_box_clips() {
        let r = prox_lp(10.0, 0.01, 0.5, 4.0).unwrap();
        assert_eq!(r.value, 4.0);
        assert_eq!(r.branch, Branch::AtBound);
    }

    #[test]
    fn integer_rounding_and_ties() {
        let inf = f64::INFINITY;
        assert_eq!(prox_integer(2.3, inf).value, 2.0);
        let half = prox_integer(2.5, inf);
        assert_eq!(half.value, 2.0);
        assert!(half.tie);
        let neg = prox_integer(-0.5, inf);
        assert_eq!(neg.value, 0.0);
        assert!(neg.tie);
        assert_eq!(prox_integer(7.9, 2.0).value, 2.0);
        assert_eq!(prox_integer(-7.9, 2.0).value, -2.0);
    }

    #[test]
    fn log_quadratic_root() {
        let pen = PenaltySpec::log(1.0, f64::INFINITY, 0.0, 1.0).unwrap();
        let r = prox_scalar(3.0, 0.1, &pen).unwrap();
        // larger root of u^2 - 2u - 2.9 = 0
        assert_abs_diff_eq!(r.value, 1.0 + 3.9f64.sqrt(), epsilon = 1e-12);
        assert_eq!(prox_scalar(1e-3, 1.0, &pen).unwrap().value, 0.0);
    }

    #[test]
    fn sparsity_constants_closed_forms() {
        let l0 = PenaltySpec::l0(f64::INFINITY, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(compute_u0(0.5, &l0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(compute_q0(0.5, &l0).unwrap(), 1.0, epsilon = 1e-15);

        // alpha = beta = 0.01, L = 0.1: s = beta / (alpha + L) = 1/11
        let s = 0.01 / 0.11;
        let u0 = compute_u0(s, &lp(0.5, 4.0)).unwrap();
        assert_abs_diff_eq!(u0, 11f64.powf(-2.0 / 3.0), epsilon = 1e-14);
        assert_abs_diff_eq!(u0, 0.2021, epsilon = 1e-4);

        let int = PenaltySpec::integer(2.0, 0.0, 1.0).unwrap();
        assert_eq!(compute_u0(3.0, &int).unwrap(), 1.0);

        assert_abs_diff_eq!(compute_u_inflection(1.0, 0.5), 4f64.powf(-2.0 / 3.0), epsilon = 1e-15);
        assert_abs_diff_eq!(compute_u_inflection(1.0, 0.5), 0.3969, epsilon = 1e-4);
    }

    #[test]
    fn inflection_matches_alpha_beta_form() {
        let (alpha, beta, p): (f64, f64, f64) = (0.002, 0.03, 0.9);
        let expected = (alpha / (beta * p * (1.0 - p))).powf(1.0 / (p - 2.0));
        assert_abs_diff_eq!(compute_u_inflection(beta / alpha, p), expected, epsilon = 1e-13);
        // convex from u_I on
        let s = beta / alpha;
        let u_i = compute_u_inflection(s, p);
        for k in 0..200 {
            let u = u_i * (1.0 + 0.05 * k as f64);
            assert!(1.0 - s * p * (1.0 - p) * u.powf(p - 2.0) >= -1e-12);
        }
        assert!(compute_u_inflection(1.0, 0.999_999) < 1e-5);
    }

    #[test]
    fn q0_decreases_with_weight() {
        let pen = lp(0.5, f64::INFINITY);
        let mut last = f64::INFINITY;
        for k in 0..12 {
            let s = 10f64.powi(-k);
            let q0 = compute_q0(s, &pen).unwrap();
            assert!(q0 < last && q0 > 0.0);
            last = q0;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn strong_convexity_condition() {
        assert!(!check_strong_conv_condition(0.1, 0.01, 0.5));
        assert!(!check_strong_conv_condition(0.005, 0.001, 0.9));
        assert!(check_strong_conv_condition(0.001, 0.002, 0.5));
    }

    #[test]
    fn invalid_spec_is_rejected() {
        assert!(PenaltySpec::lp(1.2, 1.0, 0.0, 1.0).is_err());
        assert!(PenaltySpec::log(-1.0, 1.0, 0.0, 1.0).is_err());
        assert!(PenaltySpec::l0(0.0, 0.0, 1.0).is_err());
        let pen = lp(0.5, 1.0);
        assert!(prox_scalar(1.0, -1.0, &pen).is_err());
        assert!(prox_scalar(f64::NAN, 1.0, &pen).is_err());
    }

    #[test]
    fn oracle_at_origin() {
        let pen = lp(0.3, 2.0);
        assert_eq!(brute_force_prox(0.0, 1.0, &pen, 2000, 1e-12), 0.0);
    }
}
