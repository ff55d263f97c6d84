//! Odeco systems under constant control, `x' = A x^{k-1} + b`.
//!
//! In the eigenvector basis the modes decouple into scalar equations
//! `c' = lambda c^{k-1} + b~` with `b~ = V^T b`. Separation of variables
//! gives the elapsed time as `t(c) = ∫_alpha^c ds / (lambda s^{k-1} + b~)`;
//! the same map has a closed form in the hypergeometric function
//! `g((k-2)/(k-1), z)`. States at a given time come from inverting `t(c)`.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::dynamics::odeco_tolerance;
use crate::error::{Error, Result};
use crate::hypergeometric::gauss_g_principal;
use crate::linalg;
use crate::quadrature::integrate;
use crate::spectral::OdecoDecomposition;

/// `c' = lambda c^{k-1} + b_tilde`, `c(0) = alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlledModalProblem {
    pub order: usize,
    pub lambda: f64,
    pub b_tilde: f64,
    pub alpha: f64,
}

/// Long-time behaviour of one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModalFate {
    /// `alpha` is itself an equilibrium.
    Stationary,
    /// Approaches the equilibrium monotonically as `t -> inf`.
    Converges { equilibrium: f64 },
    /// Escapes to infinity at the given finite time.
    Escapes { time: f64 },
    /// Grows without bound but exists for all time (pure drift).
    Drifts,
}

impl ControlledModalProblem {
    pub fn new(order: usize, lambda: f64, b_tilde: f64, alpha: f64) -> Result<Self> {
        if order < 3 {
            return Err(Error::UnsupportedOrder {
                order,
                reason: "controlled modal problems need k >= 3",
            });
        }
        if !(lambda.is_finite() && b_tilde.is_finite() && alpha.is_finite()) {
            return Err(Error::InvalidArgument("modal parameters must be finite"));
        }
        Ok(ControlledModalProblem {
            order,
            lambda,
            b_tilde,
            alpha,
        })
    }

    fn km1(&self) -> i32 {
        self.order as i32 - 1
    }

    /// `lambda c^{k-1} + b_tilde`.
    pub fn rate(&self, c: f64) -> f64 {
        self.lambda * c.powi(self.km1()) + self.b_tilde
    }

    /// Real roots of the rate, ascending. Empty when `lambda = 0`.
    pub fn real_roots(&self) -> Vec<f64> {
        if self.lambda == 0.0 {
            return Vec::new();
        }
        let q = -self.b_tilde / self.lambda;
        let p = 1.0 / f64::from(self.km1());
        if self.km1() % 2 == 1 {
            vec![q.signum() * q.abs().powf(p)]
        } else if q > 0.0 {
            let r = q.powf(p);
            vec![-r, r]
        } else if q == 0.0 {
            vec![0.0]
        } else {
            Vec::new()
        }
    }

    fn direction(&self) -> f64 {
        let f = self.rate(self.alpha);
        if f > 0.0 {
            1.0
        } else if f < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    /// The equilibrium the flow from `alpha` approaches, if any.
    pub fn equilibrium(&self) -> Option<f64> {
        match self.fate() {
            ModalFate::Stationary => Some(self.alpha),
            ModalFate::Converges { equilibrium } => Some(equilibrium),
            _ => None,
        }
    }

    pub fn fate(&self) -> ModalFate {
        let s = self.direction();
        if s == 0.0 {
            return ModalFate::Stationary;
        }
        let ahead = self
            .real_roots()
            .into_iter()
            .filter(|&r| (r - self.alpha) * s > 0.0)
            .reduce(|a, b| if (a - self.alpha).abs() <= (b - self.alpha).abs() { a } else { b });
        if let Some(e) = ahead {
            return ModalFate::Converges { equilibrium: e };
        }
        if self.lambda == 0.0 {
            return ModalFate::Drifts;
        }
        ModalFate::Escapes {
            time: self.divergent_integral(s),
        }
    }

    /// Finite escape time, `+inf` if the mode exists for all time.
    pub fn escape_time(&self) -> f64 {
        match self.fate() {
            ModalFate::Escapes { time } => time,
            _ => f64::INFINITY,
        }
    }

    /// `∫_alpha^{s inf} dc / rate(c)`; the tail past `beta` is mapped to a
    /// finite interval with `sigma = 1/c`.
    fn divergent_integral(&self, s: f64) -> f64 {
        let beta = s * (self.alpha.abs() + 1.0);
        let head = if beta == self.alpha {
            0.0
        } else {
            integrate(|c| 1.0 / self.rate(c), self.alpha, beta).unwrap_or(f64::NAN)
        };
        let k = self.order as i32;
        let tail = integrate(
            |sigma: f64| sigma.powi(k - 3) / (self.lambda + self.b_tilde * sigma.powi(k - 1)),
            0.0,
            1.0 / beta,
        )
        .unwrap_or(f64::NAN);
        head + tail
    }
}

/// Elapsed time for the mode to travel from `alpha` to `c`.
///
/// The root of the rate nearest the path is subtracted analytically: with
/// `rate(s) = lambda (s - e) h(s)` the logarithmic part integrates in
/// closed form and the remainder is smooth.
pub fn implicit_time(p: &ControlledModalProblem, c: f64) -> Result<f64> {
    let a = p.alpha;
    if !c.is_finite() {
        return Err(Error::InvalidArgument("modal state must be finite"));
    }
    if c == a {
        return Ok(0.0);
    }
    let roots = p.real_roots();
    let (lo, hi) = (a.min(c), a.max(c));
    if p.lambda == 0.0 {
        if p.b_tilde == 0.0 {
            return Err(Error::PathCrossesEquilibrium { at: a });
        }
        return Ok((c - a) / p.b_tilde);
    }
    if let Some(&r) = roots.iter().find(|&&r| r >= lo && r <= hi) {
        return Err(Error::PathCrossesEquilibrium { at: r });
    }
    let km2 = (p.order - 2) as i32;
    if p.b_tilde == 0.0 {
        // uncontrolled closed form; 0 is the only root, so a and c share a sign
        return Ok((c.powi(-km2) - a.powi(-km2)) / (-f64::from(km2) * p.lambda));
    }
    let nearest = roots
        .iter()
        .copied()
        .reduce(|x, y| if (x - c).abs() <= (y - c).abs() { x } else { y });
    let Some(e) = nearest else {
        return integrate(|s| 1.0 / p.rate(s), a, c);
    };
    // h(s) = sum_{j=0}^{k-2} s^j e^{k-2-j}, so rate(s) = lambda (s - e) h(s)
    let h = |s: f64| (0..=km2).map(|j| s.powi(j) * e.powi(km2 - j)).sum::<f64>();
    // (h(e) - h(s)) / (e - s) = sum_{j=1}^{k-2} e^{k-2-j} sum_{i<j} s^i e^{j-1-i}
    let q = |s: f64| {
        (1..=km2)
            .map(|j| e.powi(km2 - j) * (0..j).map(|i| s.powi(i) * e.powi(j - 1 - i)).sum::<f64>())
            .sum::<f64>()
    };
    let he = h(e);
    let singular = ((c - e) / (a - e)).ln() / (p.lambda * he);
    let regular = integrate(|s| -q(s) / (p.lambda * h(s) * he), a, c)?;
    Ok(singular + regular)
}

/// The same map through the hypergeometric closed form
/// `F(c) = -g(a, z(c)) / ((k-2) lambda c^{k-2})`, `a = (k-2)/(k-1)`,
/// `z(c) = -b~ / (lambda c^{k-1})`, as `F(c) - F(alpha)`. Arguments beyond
/// the branch point use the real part of the principal branch; the
/// imaginary parts cancel because they are constant along the path.
pub fn implicit_time_hypergeometric(p: &ControlledModalProblem, c: f64) -> Result<f64> {
    if p.lambda == 0.0 {
        return Err(Error::InvalidArgument("the closed form needs lambda != 0"));
    }
    if c == 0.0 || p.alpha == 0.0 || c.signum() != p.alpha.signum() {
        return Err(Error::InvalidArgument("the closed form needs alpha and c of one sign"));
    }
    let (lo, hi) = (p.alpha.min(c), p.alpha.max(c));
    if let Some(r) = p.real_roots().into_iter().find(|&r| r >= lo && r <= hi) {
        return Err(Error::PathCrossesEquilibrium { at: r });
    }
    let k = p.order as i32;
    let a = f64::from(k - 2) / f64::from(k - 1);
    let f = |x: f64| -> Result<f64> {
        let z = -p.b_tilde / (p.lambda * x.powi(k - 1));
        let g = gauss_g_principal(a, z)?;
        Ok(-g / (f64::from(k - 2) * p.lambda * x.powi(k - 2)))
    };
    Ok(f(c)? - f(p.alpha)?)
}

/// Inverts [`implicit_time`]: the modal state at time `t >= 0`, with
/// `|implicit_time(c) - t| <= tol`.
pub fn solve_modal(p: &ControlledModalProblem, t: f64, tol: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument("time must be finite and non-negative"));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive"));
    }
    if t == 0.0 {
        return Ok(p.alpha);
    }
    let a = p.alpha;
    let fate = p.fate();
    match fate {
        ModalFate::Stationary => return Ok(a),
        ModalFate::Drifts => return Ok(a + p.b_tilde * t),
        ModalFate::Escapes { time } if t >= time => {
            return Err(Error::ModalBlowUp {
                mode: 0,
                escape_time: time,
            })
        }
        _ => {}
    }
    let km2 = (p.order - 2) as i32;
    if p.b_tilde == 0.0 {
        let base = 1.0 - f64::from(km2) * p.lambda * a.powi(km2) * t;
        return Ok(a * base.powf(-1.0 / f64::from(km2)));
    }
    let s = p.direction();
    // time is increasing along the flow direction; keep T(lo) <= t < T(hi)
    let mut lo = a;
    let mut hi = match fate {
        ModalFate::Converges { equilibrium } => equilibrium,
        _ => {
            let mut step = a.abs().max(1.0);
            loop {
                let cand = a + s * step;
                if cand.abs() > 1e12 {
                    return Err(Error::BracketFailed);
                }
                if implicit_time(p, cand)? > t {
                    break cand;
                }
                lo = cand;
                step *= 2.0;
            }
        }
    };
    let mut c = 0.5 * (lo + hi);
    for _ in 0..400 {
        let tc = implicit_time(p, c)?;
        let err = tc - t;
        if err.abs() <= tol {
            return Ok(c);
        }
        if err < 0.0 {
            lo = c;
        } else {
            hi = c;
        }
        // Newton on T(c) = t with T'(c) = 1 / rate(c)
        let newton = c - err * p.rate(c);
        let inside = (newton - lo) * (newton - hi) < 0.0;
        let next = if inside { newton } else { 0.5 * (lo + hi) };
        if next == c || next == lo || next == hi {
            return Ok(c);
        }
        c = next;
    }
    Ok(c)
}

fn check_certified(d: &OdecoDecomposition, order_reason: &'static str) -> Result<()> {
    if d.order() < 3 {
        return Err(Error::UnsupportedOrder {
            order: d.order(),
            reason: order_reason,
        });
    }
    let tolerance = odeco_tolerance(d);
    if d.residual() > tolerance {
        return Err(Error::NotOdeco {
            residual: d.residual(),
            tolerance,
        });
    }
    Ok(())
}

/// Modal problems for the controlled system with initial state `x0`.
pub fn modal_problems(d: &OdecoDecomposition, b: &[f64], x0: &[f64]) -> Result<Vec<ControlledModalProblem>> {
    check_certified(d, "controlled solutions need k >= 3")?;
    for v in [b, x0] {
        if v.len() != d.dim() {
            return Err(Error::DimensionMismatch {
                expected: d.dim(),
                found: v.len(),
            });
        }
    }
    let bt = linalg::mat_t_vec(d.eigenvectors(), b);
    let alphas = linalg::mat_t_vec(d.eigenvectors(), x0);
    (0..d.dim())
        .map(|r| ControlledModalProblem::new(d.order(), d.eigenvalues()[r], bt[r], alphas[r]))
        .collect()
}

/// Tolerance used on the time map when inverting it for a state.
pub fn default_time_tolerance(t: f64) -> f64 {
    1e-13 * t.max(1.0)
}

/// `x(t) = V c(t)` for the controlled system.
pub fn controlled_solution(d: &OdecoDecomposition, b: &[f64], x0: &[f64], t: f64) -> Result<Vec<f64>> {
    let problems = modal_problems(d, b, x0)?;
    let c = modal_states(&problems, t)?;
    Ok(linalg::mat_vec(d.eigenvectors(), &c))
}

/// Solves every mode at time `t`, tagging blow-ups with their mode index.
pub fn modal_states(problems: &[ControlledModalProblem], t: f64) -> Result<Vec<f64>> {
    problems
        .iter()
        .enumerate()
        .map(|(r, p)| {
            solve_modal(p, t, default_time_tolerance(t)).map_err(|e| match e {
                Error::ModalBlowUp { escape_time, .. } => Error::ModalBlowUp { mode: r, escape_time },
                other => other,
            })
        })
        .collect()
}

/// Earliest modal escape time, `+inf` if none.
pub fn controlled_escape_time(problems: &[ControlledModalProblem]) -> f64 {
    problems
        .iter()
        .map(ControlledModalProblem::escape_time)
        .fold(f64::INFINITY, f64::min)
}

/// `V e` with `e_r` the real `(k-1)`-th root of `-b~_r / lambda_r`. When
/// `k-1` is even both signs are roots; the non-negative one is returned.
pub fn controlled_equilibrium(d: &OdecoDecomposition, b: &[f64]) -> Result<Vec<f64>> {
    if d.order() < 3 {
        return Err(Error::UnsupportedOrder {
            order: d.order(),
            reason: "controlled equilibria need k >= 3",
        });
    }
    if b.len() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: d.dim(),
            found: b.len(),
        });
    }
    let bt = linalg::mat_t_vec(d.eigenvectors(), b);
    let zero = 1e-12 * d.z_spectral_radius().max(1.0);
    let km1 = d.order() as i32 - 1;
    let mut e = Vec::with_capacity(d.dim());
    for (r, (&l, &br)) in d.eigenvalues().iter().zip(&bt).enumerate() {
        if l.abs() <= zero {
            if br.abs() <= zero {
                e.push(0.0);
                continue;
            }
            return Err(Error::NoRealEquilibrium { mode: r });
        }
        let q = -br / l;
        if km1 % 2 == 0 && q < 0.0 {
            return Err(Error::NoRealEquilibrium { mode: r });
        }
        e.push(q.signum() * q.abs().powf(1.0 / f64::from(km1)));
    }
    Ok(linalg::mat_vec(d.eigenvectors(), &e))
}
