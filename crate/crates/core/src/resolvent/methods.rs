use std::sync::Arc;

use num_complex::Complex64;

use super::{deformed_contour_integral, pole_term, real_line_integral, stark_integral, Kernel};
use crate::error::{Error, Result};

/// A way of evaluating the continued matrix element for one kernel.
pub trait ContinuationMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn supports(&self, f: f64) -> bool;
    fn evaluate(&self, kernel: &Kernel, z: Complex64) -> Result<Complex64>;
}

/// Real-line integral, plus the residue term below the positive axis.
#[derive(Debug, Clone, Copy, Default)]
pub struct FreePole;

impl ContinuationMethod for FreePole {
    fn name(&self) -> &'static str {
        "free-pole"
    }

    fn supports(&self, f: f64) -> bool {
        f == 0.0
    }

    fn evaluate(&self, kernel: &Kernel, z: Complex64) -> Result<Complex64> {
        let base = real_line_integral(kernel, z)?;
        if z.im < 0.0 {
            Ok(base + pole_term(kernel, z))
        } else {
            Ok(base)
        }
    }
}

/// Momentum contour bent around `±√z`; covers a strip around the positive axis.
#[derive(Debug, Clone, Copy, Default)]
pub struct FreeContour;

impl ContinuationMethod for FreeContour {
    fn name(&self) -> &'static str {
        "free-contour"
    }

    fn supports(&self, f: f64) -> bool {
        f == 0.0
    }

    fn evaluate(&self, kernel: &Kernel, z: Complex64) -> Result<Complex64> {
        deformed_contour_integral(kernel, z)
    }
}

/// Time integral of the constant-field propagator.
#[derive(Debug, Clone, Copy, Default)]
pub struct StarkPropagator;

impl ContinuationMethod for StarkPropagator {
    fn name(&self) -> &'static str {
        "stark-propagator"
    }

    fn supports(&self, f: f64) -> bool {
        f > 0.0
    }

    fn evaluate(&self, kernel: &Kernel, z: Complex64) -> Result<Complex64> {
        if kernel.f <= 0.0 {
            return Err(Error::InvalidParameter("propagator method needs f > 0".into()));
        }
        stark_integral(kernel, z)
    }
}

/// Picks the contour near the axis, the residue formula away from it, and
/// the propagator whenever a field is on.
#[derive(Debug, Clone, Copy, Default)]
pub struct Auto;

impl ContinuationMethod for Auto {
    fn name(&self) -> &'static str {
        "auto"
    }

    fn supports(&self, _f: f64) -> bool {
        true
    }

    fn evaluate(&self, kernel: &Kernel, z: Complex64) -> Result<Complex64> {
        if kernel.f > 0.0 {
            StarkPropagator.evaluate(kernel, z)
        } else if z.im.abs() < kernel.settings.axis_band {
            FreeContour.evaluate(kernel, z)
        } else {
            FreePole.evaluate(kernel, z)
        }
    }
}

/// Named continuation methods, selectable at runtime.
#[derive(Clone, Default)]
pub struct MethodRegistry {
    entries: Vec<Arc<dyn ContinuationMethod>>,
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Auto));
        r.register(Arc::new(FreePole));
        r.register(Arc::new(FreeContour));
        r.register(Arc::new(StarkPropagator));
        r
    }

    /// Adds a method, replacing any existing one with the same name.
    pub fn register(&mut self, method: Arc<dyn ContinuationMethod>) {
        self.entries.retain(|m| m.name() != method.name());
        self.entries.push(method);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ContinuationMethod>> {
        self.entries
            .iter()
            .find(|m| m.name() == name)
            .cloned()
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown continuation method '{name}' (known: {})",
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|m| m.name()).collect()
    }
}
