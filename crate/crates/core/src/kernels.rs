//! Communication weights `psi(r)` and the metadata the integrator and the
//! analysis passes need from them: the global infimum `psi_*`, the running
//! infimum over `[0, r]`, the primitive, tail integrals, and the Lipschitz
//! constant on `[r, inf)`.
//!
//! Kernels are built from short config strings:
//!
//! ```
//! use flocksim::kernels::Kernel;
//!
//! let k: Kernel = "power:1.5".parse().unwrap();
//! assert!(k.singular_at_zero());
//! assert_eq!(k.eval(1.0).unwrap(), 1.0);
//!
//! let shifted: Kernel = "shift:power:1.5:+0.2".parse().unwrap();
//! assert!((shifted.psi_star() - 0.2).abs() < 1e-15);
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{FlockError, Result};

/// Lower end of the bracket used when minimizing a kernel numerically.
const GOLDEN_LO: f64 = 1e-8;
const GOLDEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Kernel {
    /// `r^{-alpha}`
    PowerLaw {
        alpha: f64,
    },
    /// `(1 + r^2)^{-alpha/2}`
    Regularized {
        alpha: f64,
    },
    /// `|log(1 + r)|^{-alpha}`
    LogPower {
        alpha: f64,
    },
    Constant {
        c: f64,
    },
    /// `base(r) + shift`
    Shifted {
        base: Box<Kernel>,
        shift: f64,
    },
}

impl Kernel {
    pub fn power(alpha: f64) -> Result<Self> {
        check_exponent(alpha)?;
        Ok(Kernel::PowerLaw { alpha })
    }

    pub fn regularized(alpha: f64) -> Result<Self> {
        check_exponent(alpha)?;
        Ok(Kernel::Regularized { alpha })
    }

    pub fn log_power(alpha: f64) -> Result<Self> {
        check_exponent(alpha)?;
        Ok(Kernel::LogPower { alpha })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(FlockError::config(format!("constant kernel value {c} is not finite")));
        }
        Ok(Kernel::Constant { c })
    }

    pub fn shifted(base: Kernel, shift: f64) -> Result<Self> {
        if !shift.is_finite() {
            return Err(FlockError::config(format!("kernel shift {shift} is not finite")));
        }
        Ok(Kernel::Shifted { base: Box::new(base), shift })
    }

    /// True iff `psi(r) -> inf` as `r -> 0+`.
    pub fn singular_at_zero(&self) -> bool {
        match self {
            Kernel::PowerLaw { .. } | Kernel::LogPower { .. } => true,
            Kernel::Regularized { .. } | Kernel::Constant { .. } => false,
            Kernel::Shifted { base, .. } => base.singular_at_zero(),
        }
    }

    /// Global infimum of `psi` over `[0, inf)`.
    pub fn psi_star(&self) -> f64 {
        match self {
            Kernel::PowerLaw { .. } | Kernel::Regularized { .. } | Kernel::LogPower { .. } => 0.0,
            Kernel::Constant { c } => *c,
            Kernel::Shifted { base, shift } => base.psi_star() + shift,
        }
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r < 0.0 {
            return Err(FlockError::domain(format!("kernel evaluated at r={r}")));
        }
        if r == 0.0 && self.singular_at_zero() {
            return Err(FlockError::domain("singular kernel evaluated at r=0"));
        }
        Ok(self.eval_unchecked(r))
    }

    /// Evaluation without domain checks; callers guarantee `r > 0` for
    /// singular families.
    #[inline]
    pub(crate) fn eval_unchecked(&self, r: f64) -> f64 {
        match self {
            Kernel::PowerLaw { alpha } => r.powf(-alpha),
            Kernel::Regularized { alpha } => (1.0 + r * r).powf(-0.5 * alpha),
            Kernel::LogPower { alpha } => r.ln_1p().abs().powf(-alpha),
            Kernel::Constant { c } => *c,
            Kernel::Shifted { base, shift } => base.eval_unchecked(r) + shift,
        }
    }

    /// `inf_{0 <= s <= r} psi(s)`. Returns `+inf` for singular families at
    /// `r = 0`.
    pub fn running_inf(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r < 0.0 {
            return Err(FlockError::domain(format!("running infimum over [0, {r}]")));
        }
        match self {
            Kernel::Constant { c } => Ok(*c),
            Kernel::PowerLaw { .. } | Kernel::Regularized { .. } | Kernel::LogPower { .. } => {
                if r == 0.0 && self.singular_at_zero() {
                    Ok(f64::INFINITY)
                } else {
                    Ok(self.eval_unchecked(r))
                }
            }
            Kernel::Shifted { .. } => {
                if r == 0.0 {
                    return if self.singular_at_zero() { Ok(f64::INFINITY) } else { Ok(self.eval_unchecked(0.0)) };
                }
                let lo = GOLDEN_LO.min(r);
                let f = |s: f64| self.eval_unchecked(s);
                let mut best = golden_section_min(f, lo, r, GOLDEN_TOL);
                best = best.min(f(r)).min(f(lo));
                if !self.singular_at_zero() {
                    best = best.min(f(0.0));
                }
                Ok(best)
            }
        }
    }

    /// Antiderivative of `psi` with zero integration constant. Only power
    /// laws (optionally shifted by a constant) have one in closed form.
    pub fn primitive(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r <= 0.0 {
            return Err(FlockError::domain(format!("primitive evaluated at r={r}")));
        }
        match self {
            Kernel::PowerLaw { alpha } => Ok(power_primitive(*alpha, r)),
            Kernel::Shifted { base, shift } => match base.as_ref() {
                Kernel::PowerLaw { alpha } => Ok(power_primitive(*alpha, r) + shift * r),
                _ => Err(FlockError::Unsupported(format!("no closed-form primitive for {self}"))),
            },
            _ => Err(FlockError::Unsupported(format!("no closed-form primitive for {self}"))),
        }
    }

    /// `int_x^inf psi(y) dy` for `x > 0`; finite only for integrable tails
    /// (power law and regularized with `alpha > 1`).
    pub fn tail_integral(&self, x: f64) -> Result<f64> {
        if x.is_nan() || x <= 0.0 {
            return Err(FlockError::domain(format!("tail integral from x={x}")));
        }
        match self {
            Kernel::PowerLaw { alpha } if *alpha > 1.0 => Ok(x.powf(1.0 - alpha) / (alpha - 1.0)),
            Kernel::Regularized { alpha } if *alpha > 1.0 => {
                // y = tan(theta), then s = cos^2(theta):
                // int_x^inf (1+y^2)^{-a/2} dy = B(1/(1+x^2); (a-1)/2, 1/2) / 2
                let a = 0.5 * (alpha - 1.0);
                let u = 1.0 / (1.0 + x * x);
                Ok(0.5 * beta_reg(a, 0.5, u) * ln_beta(a, 0.5).exp())
            }
            _ => Err(FlockError::Unsupported(format!("tail of {self} is not integrable in closed form"))),
        }
    }

    /// Lipschitz constant of `psi` on `[r, inf)`.
    pub fn lipschitz_const(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r <= 0.0 {
            return Err(FlockError::domain(format!("Lipschitz constant on [{r}, inf)")));
        }
        Ok(match self {
            Kernel::PowerLaw { alpha } => alpha * r.powf(-alpha - 1.0),
            Kernel::Regularized { alpha } => {
                // |psi'| peaks at 1/sqrt(alpha+1) and decreases after it
                let s = r.max(1.0 / (alpha + 1.0).sqrt());
                alpha * s * (1.0 + s * s).powf(-0.5 * alpha - 1.0)
            }
            Kernel::LogPower { alpha } => alpha * r.ln_1p().powf(-alpha - 1.0) / (1.0 + r),
            Kernel::Constant { .. } => 0.0,
            Kernel::Shifted { base, .. } => base.lipschitz_const(r)?,
        })
    }
}

fn check_exponent(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(FlockError::config(format!("kernel exponent must be positive, got {alpha}")))
    }
}

fn power_primitive(alpha: f64, r: f64) -> f64 {
    if alpha == 1.0 {
        r.ln()
    } else {
        r.powf(1.0 - alpha) / (1.0 - alpha)
    }
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
pub(crate) fn golden_section_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs()) {
        if fc <= fd {
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
    fc.min(fd)
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::PowerLaw { alpha } => write!(f, "power:{alpha}"),
            Kernel::Regularized { alpha } => write!(f, "reg:{alpha}"),
            Kernel::LogPower { alpha } => write!(f, "log:{alpha}"),
            Kernel::Constant { c } => write!(f, "const:{c}"),
            Kernel::Shifted { base, shift } => write!(f, "shift:{base}:{shift:+}"),
        }
    }
}

impl FromStr for Kernel {
    type Err = FlockError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, rest) =
            s.split_once(':').ok_or_else(|| FlockError::config(format!("kernel spec `{s}` has no parameter")))?;
        let number = |t: &str| -> Result<f64> {
            t.trim().parse::<f64>().map_err(|_| FlockError::config(format!("bad number `{t}` in kernel spec `{s}`")))
        };
        match family {
            "power" => Kernel::power(number(rest)?),
            "reg" => Kernel::regularized(number(rest)?),
            "log" => Kernel::log_power(number(rest)?),
            "const" => Kernel::constant(number(rest)?),
            "shift" => {
                let (base, shift) = rest
                    .rsplit_once(':')
                    .ok_or_else(|| FlockError::config(format!("shifted kernel `{s}` needs a shift")))?;
                Kernel::shifted(base.parse()?, number(shift)?)
            }
            other => Err(FlockError::config(format!("unknown kernel family `{other}`"))),
        }
    }
}

impl From<Kernel> for String {
    fn from(k: Kernel) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for Kernel {
    type Error = FlockError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// A kernel clamped to its value at `radius` below that radius.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffKernel {
    base: Kernel,
    radius: f64,
}

impl CutoffKernel {
    pub fn new(base: Kernel, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(FlockError::config(format!("cutoff radius must be positive, got {radius}")));
        }
        Ok(CutoffKernel { base, radius })
    }

    pub fn base(&self) -> &Kernel {
        &self.base
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `psi(max(r, radius))`; total on `[0, inf)`.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        self.base.eval_unchecked(r.max(self.radius))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn eval_examples() {
        close(Kernel::power(1.0).unwrap().eval(2.0).unwrap(), 0.5, 1e-15);
        close(Kernel::regularized(2.0).unwrap().eval(0.0).unwrap(), 1.0, 1e-15);
        let e1 = std::f64::consts::E - 1.0;
        close(Kernel::log_power(0.5).unwrap().eval(e1).unwrap(), 1.0, 1e-15);
    }

    #[test]
    fn eval_rejects_bad_arguments() {
        let k = Kernel::power(1.0).unwrap();
        assert!(matches!(k.eval(0.0), Err(FlockError::Domain(_))));
        assert!(matches!(k.eval(-1.0), Err(FlockError::Domain(_))));
        assert!(matches!(Kernel::constant(1.0).unwrap().eval(-0.1), Err(FlockError::Domain(_))));
        assert_eq!(Kernel::constant(0.3).unwrap().eval(0.0).unwrap(), 0.3);
    }

    #[test]
    fn cutoff_examples() {
        let c = CutoffKernel::new(Kernel::power(1.0).unwrap(), 0.1).unwrap();
        close(c.eval(0.05), 10.0, 1e-12);
        close(c.eval(2.0), 0.5, 1e-15);
        let c2 = CutoffKernel::new(Kernel::power(2.0).unwrap(), 0.5).unwrap();
        close(c2.eval(0.0), 4.0, 1e-15);
        assert!(CutoffKernel::new(Kernel::power(2.0).unwrap(), 0.0).is_err());
    }

    #[test]
    fn running_inf_examples() {
        close(Kernel::power(1.0).unwrap().running_inf(4.0).unwrap(), 0.25, 1e-15);
        close(Kernel::constant(0.7).unwrap().running_inf(100.0).unwrap(), 0.7, 1e-15);
        close(Kernel::regularized(1.0).unwrap().running_inf(1.0).unwrap(), 0.5f64.sqrt(), 1e-12);
        assert_eq!(Kernel::power(1.0).unwrap().running_inf(0.0).unwrap(), f64::INFINITY);
        assert!(Kernel::power(1.0).unwrap().running_inf(-1.0).is_err());
    }

    #[test]
    fn running_inf_shifted_uses_numeric_minimum() {
        let k: Kernel = "shift:power:1.5:+0.2".parse().unwrap();
        let expect = 3f64.powf(-1.5) + 0.2;
        close(k.running_inf(3.0).unwrap(), expect, 1e-9);
        let reg: Kernel = "shift:reg:1:-0.1".parse().unwrap();
        close(reg.running_inf(0.0).unwrap(), 0.9, 1e-15);
    }

    #[test]
    fn primitive_examples() {
        close(Kernel::power(1.0).unwrap().primitive(1.0).unwrap(), 0.0, 1e-15);
        close(Kernel::power(2.0).unwrap().primitive(0.5).unwrap(), -2.0, 1e-14);
        close(Kernel::power(0.5).unwrap().primitive(4.0).unwrap(), 4.0, 1e-14);
        let k = Kernel::shifted(Kernel::power(1.0).unwrap(), 0.5).unwrap();
        close(k.primitive(2.0).unwrap(), 2f64.ln() + 1.0, 1e-14);
        assert!(matches!(Kernel::regularized(1.0).unwrap().primitive(1.0), Err(FlockError::Unsupported(_))));
        assert!(Kernel::power(1.0).unwrap().primitive(0.0).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        close(Kernel::power(1.0).unwrap().lipschitz_const(1.0).unwrap(), 1.0, 1e-15);
        close(Kernel::power(2.0).unwrap().lipschitz_const(2.0).unwrap(), 0.25, 1e-15);
        assert_eq!(Kernel::constant(3.0).unwrap().lipschitz_const(5.0).unwrap(), 0.0);
        assert!(Kernel::power(2.0).unwrap().lipschitz_const(0.0).is_err());
    }

    #[test]
    fn tail_integrals() {
        close(Kernel::power(2.0).unwrap().tail_integral(1.0).unwrap(), 1.0, 1e-15);
        close(Kernel::power(2.0).unwrap().tail_integral(4.0).unwrap(), 0.25, 1e-15);
        let reg2 = Kernel::regularized(2.0).unwrap();
        close(reg2.tail_integral(1.0).unwrap(), std::f64::consts::FRAC_PI_4, 1e-10);
        assert!(Kernel::power(1.0).unwrap().tail_integral(1.0).is_err());
    }

    #[test]
    fn regularized_tail_matches_quadrature() {
        // Simpson on y = x / u^m, with m chosen so the integrand vanishes
        // linearly at u = 0
        for &alpha in &[1.5, 3.0] {
            let k = Kernel::regularized(alpha).unwrap();
            let x = 0.7;
            let m = 2.0 / (alpha - 1.0);
            let n = 200_000;
            let h = 1.0 / n as f64;
            let g = |u: f64| {
                if u == 0.0 {
                    return 0.0;
                }
                let y = x * u.powf(-m);
                k.eval(y).unwrap() * m * x * u.powf(-m - 1.0)
            };
            let mut s = g(0.0) + g(1.0);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * g(i as f64 * h);
            }
            let quad = s * h / 3.0;
            close(k.tail_integral(x).unwrap(), quad, 1e-6);
        }
    }

    #[test]
    fn config_strings() {
        for s in ["power:1.5", "reg:0.5", "log:0.8", "const:1", "shift:power:1.5:+0.2"] {
            let k: Kernel = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert!("power".parse::<Kernel>().is_err());
        assert!("power:-1".parse::<Kernel>().is_err());
        assert!("cubic:1".parse::<Kernel>().is_err());
        assert!(!"reg:2".parse::<Kernel>().unwrap().singular_at_zero());
        assert!("log:2".parse::<Kernel>().unwrap().singular_at_zero());
    }
}
