use crate::error::Result;
use crate::numerics::Matrix;
use crate::Scalar;

const SCALED_NORM: f64 = 0.5;
const TERM_TOLERANCE: f64 = 1e-16;
const MAX_TERMS: usize = 64;

/// Matrix exponential `e^{A t}` by scaling and squaring over a truncated Taylor series.
///
/// The argument `A t` is halved until its infinity norm is at most 0.5, the series is
/// summed until a term drops below `1e-16` relative to the partial sum, and the result
/// is squared back.
pub fn mat_exp<T: Scalar>(a: &Matrix<T>, t: T) -> Result<Matrix<T>> {
    a.ensure_square()?;
    let n = a.rows();
    let mut scaled = a.scale(t);
    let norm = scaled.inf_norm();
    let half = T::lit(SCALED_NORM);
    let mut squarings = 0u32;
    if norm > half {
        squarings = (norm / half).log2().ceil().to_u32().unwrap_or(0);
        scaled = scaled.scale(T::lit(2.0).powi(-(squarings as i32)));
        // log2 rounding can leave the norm a hair above the target
        while scaled.inf_norm() > half {
            scaled = scaled.scale(T::lit(0.5));
            squarings += 1;
        }
    }

    let tolerance = T::lit(TERM_TOLERANCE);
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=MAX_TERMS {
        term = term.mul(&scaled)?.scale(T::one() / T::from_count(k));
        sum = sum.add(&term)?;
        if term.inf_norm() <= tolerance * sum.inf_norm() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.mul(&sum)?;
    }
    Ok(sum)
}
