//! Central finite differences with Richardson extrapolation.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Highest derivative order supported by the central stencils.
pub const MAX_ORDER: usize = 4;

/// Half-width of the stencil, in units of the step, for a given order.
pub fn stencil_reach(order: usize) -> usize {
    if order <= 2 {
        1
    } else {
        2
    }
}

fn central<T: Real, F: Fn(T) -> T>(f: &F, a: T, order: usize, h: T) -> T {
    let two = T::lit(2.0);
    match order {
        1 => (f(a + h) - f(a - h)) / (two * h),
        2 => (f(a + h) - two * f(a) + f(a - h)) / (h * h),
        3 => {
            (f(a + two * h) - two * f(a + h) + two * f(a - h) - f(a - two * h)) / (two * h * h * h)
        }
        4 => {
            (f(a + two * h) - T::lit(4.0) * f(a + h) + T::lit(6.0) * f(a) - T::lit(4.0) * f(a - h)
                + f(a - two * h))
                / (h * h * h * h)
        }
        _ => unreachable!("order checked by caller"),
    }
}

/// Estimate `f^(order)(a)` from central differences at steps `h, h/2, ..,
/// h/2^levels`, combined by Richardson extrapolation on the even error
/// expansion of the stencils.
pub fn derivative<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    order: usize,
    h: T,
    levels: usize,
) -> Result<T> {
    if order == 0 {
        return Ok(f(a));
    }
    if order > MAX_ORDER {
        return Err(Error::Capability {
            requested: order,
            available: MAX_ORDER,
        });
    }
    if !(h > T::zero()) {
        return Err(Error::Argument(
            "finite-difference step must be positive".into(),
        ));
    }
    let mut table: Vec<T> = Vec::with_capacity(levels + 1);
    let mut step = h;
    for _ in 0..=levels {
        table.push(central(&f, a, order, step));
        step = step / T::lit(2.0);
    }
    // Neville-style elimination of h^2, h^4, ...
    let mut factor = T::lit(4.0);
    for level in 1..=levels {
        for i in (level..=levels).rev() {
            table[i] = (factor * table[i] - table[i - 1]) / (factor - T::one());
        }
        factor = factor * T::lit(4.0);
    }
    Ok(table[levels])
}
