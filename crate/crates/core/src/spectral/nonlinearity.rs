use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

type PointwiseFn = dyn Fn(Complex64) -> Complex64 + Send + Sync;

/// Pointwise nonlinearity `f(Ψ, Ψ̄)` of the cross-diffusion equation
/// `∂tΨ = (1+iω)ΔΨ + f(Ψ, Ψ̄)`.
#[derive(Clone)]
pub enum NonlinearitySpec {
    Zero,
    /// `f = cΨ`.
    Linear { c: Complex64 },
    /// `f = (1+iβ)Ψ − (1+iδ)Ψ|Ψ|²`.
    Cubic { beta: f64, delta: f64 },
    /// Any smooth map of `Ψ` (and implicitly `Ψ̄`); derivatives are taken
    /// by central differences.
    Pointwise { name: String, map: Arc<PointwiseFn> },
}

impl fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonlinearitySpec::Zero => write!(f, "Zero"),
            NonlinearitySpec::Linear { c } => write!(f, "Linear {{ c: {c} }}"),
            NonlinearitySpec::Cubic { beta, delta } => {
                write!(f, "Cubic {{ beta: {beta}, delta: {delta} }}")
            }
            NonlinearitySpec::Pointwise { name, .. } => write!(f, "Pointwise({name})"),
        }
    }
}

impl NonlinearitySpec {
    pub fn pointwise(
        name: impl Into<String>,
        map: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        NonlinearitySpec::Pointwise {
            name: name.into(),
            map: Arc::new(map),
        }
    }

    pub fn eval(&self, psi: Complex64) -> Complex64 {
        match self {
            NonlinearitySpec::Zero => Complex64::default(),
            NonlinearitySpec::Linear { c } => c * psi,
            NonlinearitySpec::Cubic { beta, delta } => {
                Complex64::new(1.0, *beta) * psi
                    - Complex64::new(1.0, *delta) * psi * psi.norm_sqr()
            }
            NonlinearitySpec::Pointwise { map, .. } => map(psi),
        }
    }

    /// Wirtinger derivatives `(∂_Ψ f, ∂_Ψ̄ f)` at `psi`.
    pub fn derivatives(&self, psi: Complex64) -> (Complex64, Complex64) {
        match self {
            NonlinearitySpec::Zero => (Complex64::default(), Complex64::default()),
            NonlinearitySpec::Linear { c } => (*c, Complex64::default()),
            NonlinearitySpec::Cubic { beta, delta } => {
                let g = Complex64::new(1.0, *delta);
                (
                    Complex64::new(1.0, *beta) - 2.0 * g * psi.norm_sqr(),
                    -g * psi * psi,
                )
            }
            NonlinearitySpec::Pointwise { map, .. } => {
                let h = 1e-6 * (1.0 + psi.norm());
                let dx = (map(psi + h) - map(psi - h)) / (2.0 * h);
                let iy = Complex64::new(0.0, h);
                let dy = (map(psi + iy) - map(psi - iy)) / (2.0 * h);
                let i = Complex64::i();
                (0.5 * (dx - i * dy), 0.5 * (dx + i * dy))
            }
        }
    }

    /// Whether `f` is linear, so that the reduced dynamics commutes with
    /// spectral projection.
    pub fn is_linear(&self) -> bool {
        matches!(self, NonlinearitySpec::Zero | NonlinearitySpec::Linear { .. })
    }
}
