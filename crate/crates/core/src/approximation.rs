//! Reconstruction of unit inputs between communication points.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproximationKind {
    #[default]
    #[serde(alias = "zoh")]
    ZeroOrderHold,
    #[serde(alias = "extrapolation")]
    FirstOrderExtrapolation,
    #[serde(alias = "interpolation")]
    LinearInterpolation,
}

/// Time-ordered input samples received at past communication points.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBuffer<T> {
    samples: VecDeque<(T, Vector<T>)>,
    capacity: usize,
}

impl<T: Scalar> Default for InputBuffer<T> {
    fn default() -> Self {
        Self::new(2)
    }
}

impl<T: Scalar> InputBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        InputBuffer {
            samples: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn latest(&self) -> Option<&(T, Vector<T>)> {
        self.samples.back()
    }

    pub fn samples(&self) -> impl Iterator<Item = &(T, Vector<T>)> {
        self.samples.iter()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    pub fn push(&mut self, t: T, u: Vector<T>) -> Result<()> {
        if let Some((last, prev)) = self.samples.back() {
            if !(t > *last) {
                return Err(Error::NonMonotoneTime {
                    t: t.as_f64(),
                    last: last.as_f64(),
                });
            }
            if prev.len() != u.len() {
                return Err(Error::mismatch("input sample", prev.len(), u.len()));
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((t, u));
        Ok(())
    }
}

/// An input reconstruction over one communication interval, `u(t) = base + (t - t_ref) slope`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSignal<T> {
    base: Vector<T>,
    slope: Option<Vector<T>>,
    t_ref: T,
    start: T,
    end: T,
}

impl<T: Scalar> InputSignal<T> {
    /// Constant signal over `[start, end]`.
    pub fn constant(u: Vector<T>, start: T, end: T) -> Self {
        InputSignal {
            base: u,
            slope: None,
            t_ref: start,
            start,
            end,
        }
    }

    pub fn new(
        buffer: &InputBuffer<T>,
        kind: ApproximationKind,
        interval: (T, T),
        endpoint: Option<&Vector<T>>,
    ) -> Result<Self> {
        let (start, end) = interval;
        let (t_i, u_i) = buffer.latest().ok_or(Error::InsufficientSamples {
            kind: "any".into(),
            needed: 1,
            available: 0,
        })?;
        match kind {
            ApproximationKind::ZeroOrderHold => Ok(InputSignal {
                base: u_i.clone(),
                slope: None,
                t_ref: *t_i,
                start,
                end,
            }),
            ApproximationKind::FirstOrderExtrapolation => {
                let n = buffer.len();
                if n < 2 {
                    return Err(Error::InsufficientSamples {
                        kind: "first-order extrapolation".into(),
                        needed: 2,
                        available: n,
                    });
                }
                let (t_p, u_p) = &buffer.samples[n - 2];
                let slope = (u_i - u_p).scale(T::one() / (*t_i - *t_p));
                Ok(InputSignal {
                    base: u_i.clone(),
                    slope: Some(slope),
                    t_ref: *t_i,
                    start,
                    end,
                })
            }
            ApproximationKind::LinearInterpolation => {
                let u_end = endpoint.ok_or(Error::InsufficientSamples {
                    kind: "linear interpolation endpoint".into(),
                    needed: 1,
                    available: 0,
                })?;
                if u_end.len() != u_i.len() {
                    return Err(Error::mismatch(
                        "interpolation endpoint",
                        u_i.len(),
                        u_end.len(),
                    ));
                }
                let slope = (u_end - u_i).scale(T::one() / (end - *t_i));
                Ok(InputSignal {
                    base: u_i.clone(),
                    slope: Some(slope),
                    t_ref: *t_i,
                    start,
                    end,
                })
            }
        }
    }

    pub fn interval(&self) -> (T, T) {
        (self.start, self.end)
    }

    /// Value at `t`, which must lie in the interval up to rounding.
    pub fn evaluate(&self, t: T) -> Result<Vector<T>> {
        let tol = T::lit(1e-9) * (T::one() + self.end.abs());
        if t < self.start - tol || t > self.end + tol {
            return Err(Error::OutsideInterval {
                t: t.as_f64(),
                start: self.start.as_f64(),
                end: self.end.as_f64(),
            });
        }
        Ok(self.at(t))
    }

    /// Value at `t` without the interval check.
    pub fn at(&self, t: T) -> Vector<T> {
        match &self.slope {
            None => self.base.clone(),
            Some(s) => self.base.axpy(t - self.t_ref, s),
        }
    }
}

/// Evaluates the `kind` reconstruction at `t` inside `interval`.
pub fn evaluate<T: Scalar>(
    buffer: &InputBuffer<T>,
    kind: ApproximationKind,
    t: T,
    interval: (T, T),
    endpoint: Option<&Vector<T>>,
) -> Result<Vector<T>> {
    InputSignal::new(buffer, kind, interval, endpoint)?.evaluate(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64) -> Vector<f64> {
        Vector::new(vec![x])
    }

    #[test]
    fn zoh_holds_sample() {
        let mut b = InputBuffer::default();
        b.push(0.0, v(3.0)).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(
                evaluate(&b, ApproximationKind::ZeroOrderHold, t, (0.0, 1.0), None).unwrap(),
                v(3.0)
            );
        }
    }

    #[test]
    fn extrapolation_continues_line() {
        let mut b = InputBuffer::default();
        b.push(0.0, v(0.0)).unwrap();
        b.push(1.0, v(2.0)).unwrap();
        let u = evaluate(
            &b,
            ApproximationKind::FirstOrderExtrapolation,
            1.5,
            (1.0, 2.0),
            None,
        )
        .unwrap();
        assert_eq!(u, v(3.0));
    }

    #[test]
    fn interpolation_blends() {
        let mut b = InputBuffer::default();
        b.push(0.0, v(0.0)).unwrap();
        let u = evaluate(
            &b,
            ApproximationKind::LinearInterpolation,
            0.25,
            (0.0, 1.0),
            Some(&v(4.0)),
        )
        .unwrap();
        assert_eq!(u, v(1.0));
    }

    #[test]
    fn insufficient_samples() {
        let mut b = InputBuffer::<f64>::default();
        assert!(evaluate(&b, ApproximationKind::ZeroOrderHold, 0.0, (0.0, 1.0), None).is_err());
        b.push(0.0, v(1.0)).unwrap();
        assert!(matches!(
            evaluate(
                &b,
                ApproximationKind::FirstOrderExtrapolation,
                0.0,
                (0.0, 1.0),
                None
            ),
            Err(Error::InsufficientSamples { needed: 2, .. })
        ));
        assert!(evaluate(
            &b,
            ApproximationKind::LinearInterpolation,
            0.0,
            (0.0, 1.0),
            None
        )
        .is_err());
    }

    #[test]
    fn outside_interval() {
        let mut b = InputBuffer::default();
        b.push(0.0, v(1.0)).unwrap();
        assert!(matches!(
            evaluate(&b, ApproximationKind::ZeroOrderHold, 1.5, (0.0, 1.0), None),
            Err(Error::OutsideInterval { .. })
        ));
    }

    #[test]
    fn buffer_order_and_eviction() {
        let mut b = InputBuffer::default();
        b.push(0.0, v(1.0)).unwrap();
        b.push(0.2, v(2.0)).unwrap();
        let times: Vec<f64> = b.samples().map(|s| s.0).collect();
        assert_eq!(times, vec![0.0, 0.2]);
        assert!(matches!(
            b.push(0.2, v(3.0)),
            Err(Error::NonMonotoneTime { .. })
        ));
        b.push(0.4, v(3.0)).unwrap();
        let kept: Vec<f64> = b.samples().map(|s| s.1[0]).collect();
        assert_eq!(kept, vec![2.0, 3.0]);
    }

    const KINDS: [ApproximationKind; 3] = [
        ApproximationKind::ZeroOrderHold,
        ApproximationKind::FirstOrderExtrapolation,
        ApproximationKind::LinearInterpolation,
    ];

    proptest! {
        #[test]
        fn reproduces_sample_at_interval_start(
            a in -1e3f64..1e3, b in -1e3f64..1e3, e in -1e3f64..1e3, h in 1e-3f64..10.0,
        ) {
            let mut buf = InputBuffer::default();
            buf.push(0.0, v(a)).unwrap();
            buf.push(h, v(b)).unwrap();
            for kind in KINDS {
                let u = evaluate(&buf, kind, h, (h, 2.0 * h), Some(&v(e))).unwrap();
                prop_assert_eq!(u, v(b));
            }
        }

        #[test]
        fn constant_inputs_stay_constant(c in -1e3f64..1e3, h in 1e-3f64..10.0, frac in 0.0f64..1.0) {
            let mut buf = InputBuffer::default();
            buf.push(0.0, v(c)).unwrap();
            buf.push(h, v(c)).unwrap();
            for kind in KINDS {
                let u = evaluate(&buf, kind, h + frac * h, (h, 2.0 * h), Some(&v(c))).unwrap();
                prop_assert_eq!(u, v(c));
            }
        }

        #[test]
        fn extrapolation_exact_for_affine(p in -10.0f64..10.0, q in -10.0f64..10.0, h in 1e-2f64..1.0, frac in 0.0f64..1.0) {
            let f = |t: f64| p + q * t;
            let mut buf = InputBuffer::default();
            buf.push(0.0, v(f(0.0))).unwrap();
            buf.push(h, v(f(h))).unwrap();
            let t = h + frac * h;
            let u = evaluate(&buf, ApproximationKind::FirstOrderExtrapolation, t, (h, 2.0 * h), None).unwrap();
            prop_assert!((u[0] - f(t)).abs() < 1e-9 * (1.0 + f(t).abs()));
        }
    }
}
