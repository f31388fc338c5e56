//! Model representations and the matrix-exponential oracle for linear systems.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{mat_exp, Matrix, Vector};
use crate::Scalar;

/// Right-hand side `F(x, u)` of a first-order model.
pub type DerivativeFn<T> = Arc<dyn Fn(&Vector<T>, &Vector<T>) -> Vector<T> + Send + Sync>;
/// Output map `G(x, u)`.
pub type OutputFn<T> = Arc<dyn Fn(&Vector<T>, &Vector<T>) -> Vector<T> + Send + Sync>;
/// Acceleration `F(x, u)` of a second-order model.
pub type AccelerationFn<T> = Arc<dyn Fn(&Vector<T>, &Vector<T>) -> Vector<T> + Send + Sync>;
/// Output map of a second-order model, `G(position, velocity, u)`.
pub type SecondOrderOutputFn<T> =
    Arc<dyn Fn(&Vector<T>, &Vector<T>, &Vector<T>) -> Vector<T> + Send + Sync>;

/// Which scalar components depend on which, used for fine-grained dependency graphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyMasks {
    /// `output_input[k][j]`: output `k` reads input `j` directly.
    pub output_input: Vec<Vec<bool>>,
    /// `output_state[k][i]`: output `k` reads state `i`.
    pub output_state: Vec<Vec<bool>>,
    /// `state_input[i][j]`: state `i` evolves under the influence of input `j`.
    pub state_input: Vec<Vec<bool>>,
}

impl DependencyMasks {
    pub fn dense(outputs: usize, states: usize, inputs: usize) -> Self {
        DependencyMasks {
            output_input: vec![vec![true; inputs]; outputs],
            output_state: vec![vec![true; states]; outputs],
            state_input: vec![vec![true; inputs]; states],
        }
    }

    pub fn has_feedthrough(&self) -> bool {
        self.output_input.iter().flatten().any(|&b| b)
    }

    pub fn validate(&self, outputs: usize, states: usize, inputs: usize) -> Result<()> {
        let check = |m: &Vec<Vec<bool>>, rows: usize, cols: usize, what: &str| -> Result<()> {
            if m.len() != rows {
                return Err(Error::mismatch(format!("{what} mask rows"), rows, m.len()));
            }
            for r in m {
                if r.len() != cols {
                    return Err(Error::mismatch(
                        format!("{what} mask columns"),
                        cols,
                        r.len(),
                    ));
                }
            }
            Ok(())
        };
        check(&self.output_input, outputs, inputs, "output/input")?;
        check(&self.output_state, outputs, states, "output/state")?;
        check(&self.state_input, states, inputs, "state/input")
    }
}

/// `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystemModel<T> {
    pub a: Matrix<T>,
    pub b: Matrix<T>,
    pub c: Matrix<T>,
    pub d: Matrix<T>,
    pub x0: Vector<T>,
}

impl<T: Scalar> LinearSystemModel<T> {
    pub fn new(
        a: Matrix<T>,
        b: Matrix<T>,
        c: Matrix<T>,
        d: Matrix<T>,
        x0: Vector<T>,
    ) -> Result<Self> {
        a.ensure_square()?;
        let n = a.rows();
        if b.rows() != n {
            return Err(Error::mismatch("B rows", n, b.rows()));
        }
        if c.cols() != n {
            return Err(Error::mismatch("C columns", n, c.cols()));
        }
        if d.rows() != c.rows() {
            return Err(Error::mismatch("D rows", c.rows(), d.rows()));
        }
        if d.cols() != b.cols() {
            return Err(Error::mismatch("D columns", b.cols(), d.cols()));
        }
        if x0.len() != n {
            return Err(Error::mismatch("initial state", n, x0.len()));
        }
        Ok(LinearSystemModel { a, b, c, d, x0 })
    }

    /// Autonomous system with full-state output and no inputs.
    pub fn autonomous(a: Matrix<T>, x0: Vector<T>) -> Result<Self> {
        let n = a.rows();
        Self::new(
            a,
            Matrix::zeros(n, 0),
            Matrix::identity(n),
            Matrix::zeros(n, 0),
            x0,
        )
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }

    pub fn derivative(&self, x: &Vector<T>, u: &Vector<T>) -> Vector<T> {
        let ax = self.a.mul_vec(x).expect("state dimension checked");
        let bu = self.b.mul_vec(u).expect("input dimension checked");
        &ax + &bu
    }

    pub fn output(&self, x: &Vector<T>, u: &Vector<T>) -> Vector<T> {
        let cx = self.c.mul_vec(x).expect("state dimension checked");
        let du = self.d.mul_vec(u).expect("input dimension checked");
        &cx + &du
    }

    /// Masks from the nonzero patterns. A state depends on an input if the input
    /// enters through `B` and reaches the state along the nonzero pattern of `A`.
    pub fn masks(&self) -> DependencyMasks {
        let n = self.state_dim();
        let m = self.input_dim();
        let a = self.a.pattern();
        let b = self.b.pattern();
        let mut state_input = vec![vec![false; m]; n];
        for j in 0..m {
            let mut stack: Vec<usize> = (0..n).filter(|&i| b[i][j]).collect();
            for &i in &stack {
                state_input[i][j] = true;
            }
            while let Some(k) = stack.pop() {
                for i in 0..n {
                    // x_i' depends on x_k when A[i][k] != 0
                    if a[i][k] && !state_input[i][j] {
                        state_input[i][j] = true;
                        stack.push(i);
                    }
                }
            }
        }
        DependencyMasks {
            output_input: self.d.pattern(),
            output_state: self.c.pattern(),
            state_input,
        }
    }
}

/// Constant forcing term `b` in `x' = A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineDrive<T> {
    pub b: Vector<T>,
}

impl<T: Scalar> AffineDrive<T> {
    pub fn new(b: Vector<T>) -> Self {
        AffineDrive { b }
    }

    pub fn zero(n: usize) -> Self {
        AffineDrive {
            b: Vector::zeros(n),
        }
    }
}

/// General first-order model with black-box evaluation rules.
#[derive(Clone)]
pub struct GeneralModel<T> {
    pub state_dim: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub derivative: DerivativeFn<T>,
    pub output: OutputFn<T>,
    pub x0: Vector<T>,
    pub masks: DependencyMasks,
}

impl<T: Scalar> GeneralModel<T> {
    /// Model with fully dense dependency masks.
    pub fn new(
        state_dim: usize,
        input_dim: usize,
        output_dim: usize,
        derivative: DerivativeFn<T>,
        output: OutputFn<T>,
        x0: Vector<T>,
    ) -> Result<Self> {
        if x0.len() != state_dim {
            return Err(Error::mismatch("initial state", state_dim, x0.len()));
        }
        Ok(GeneralModel {
            state_dim,
            input_dim,
            output_dim,
            derivative,
            output,
            x0,
            masks: DependencyMasks::dense(output_dim, state_dim, input_dim),
        })
    }

    pub fn with_masks(mut self, masks: DependencyMasks) -> Result<Self> {
        masks.validate(self.output_dim, self.state_dim, self.input_dim)?;
        self.masks = masks;
        Ok(self)
    }

    pub fn from_linear(model: &LinearSystemModel<T>) -> Self {
        let masks = model.masks();
        let f = model.clone();
        let g = model.clone();
        GeneralModel {
            state_dim: model.state_dim(),
            input_dim: model.input_dim(),
            output_dim: model.output_dim(),
            derivative: Arc::new(move |x, u| f.derivative(x, u)),
            output: Arc::new(move |x, u| g.output(x, u)),
            x0: model.x0.clone(),
            masks,
        }
    }
}

impl<T> fmt::Debug for GeneralModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralModel")
            .field("state_dim", &self.state_dim)
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .finish_non_exhaustive()
    }
}

/// `x'' = F(x, u)` with `x(0) = x0`, `x'(0) = v0`.
///
/// Dependency masks are expressed over the first-order state `[x; v]`.
#[derive(Clone)]
pub struct SecondOrderModel<T> {
    pub dim: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub acceleration: AccelerationFn<T>,
    pub output: SecondOrderOutputFn<T>,
    pub x0: Vector<T>,
    pub v0: Vector<T>,
    pub masks: DependencyMasks,
}

impl<T: Scalar> SecondOrderModel<T> {
    pub fn new(
        dim: usize,
        input_dim: usize,
        output_dim: usize,
        acceleration: AccelerationFn<T>,
        output: SecondOrderOutputFn<T>,
        x0: Vector<T>,
        v0: Vector<T>,
    ) -> Result<Self> {
        if x0.len() != dim {
            return Err(Error::mismatch("initial position", dim, x0.len()));
        }
        if v0.len() != dim {
            return Err(Error::mismatch("initial velocity", dim, v0.len()));
        }
        Ok(SecondOrderModel {
            dim,
            input_dim,
            output_dim,
            acceleration,
            output,
            x0,
            v0,
            masks: DependencyMasks::dense(output_dim, 2 * dim, input_dim),
        })
    }

    pub fn with_masks(mut self, masks: DependencyMasks) -> Result<Self> {
        masks.validate(self.output_dim, 2 * self.dim, self.input_dim)?;
        self.masks = masks;
        Ok(self)
    }
}

impl<T> fmt::Debug for SecondOrderModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecondOrderModel")
            .field("dim", &self.dim)
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .finish_non_exhaustive()
    }
}

/// State becomes `[position; velocity]` and `F` returns `[velocity; F2(position, u)]`.
pub fn to_first_order<T: Scalar>(m: &SecondOrderModel<T>) -> GeneralModel<T> {
    let dim = m.dim;
    let accel = m.acceleration.clone();
    let out = m.output.clone();
    GeneralModel {
        state_dim: 2 * dim,
        input_dim: m.input_dim,
        output_dim: m.output_dim,
        derivative: Arc::new(move |s, u| {
            let (x, v) = s.split_at(dim);
            v.concat(&accel(&x, u))
        }),
        output: Arc::new(move |s, u| {
            let (x, v) = s.split_at(dim);
            out(&x, &v, u)
        }),
        x0: m.x0.concat(&m.v0),
        masks: m.masks.clone(),
    }
}

/// Any model a simulation unit can wrap.
#[derive(Debug, Clone)]
pub enum Model<T> {
    Linear(LinearSystemModel<T>),
    General(GeneralModel<T>),
    SecondOrder(SecondOrderModel<T>),
}

impl<T: Scalar> Model<T> {
    /// Dimension of the first-order state.
    pub fn state_dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.state_dim(),
            Model::General(m) => m.state_dim,
            Model::SecondOrder(m) => 2 * m.dim,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.input_dim(),
            Model::General(m) => m.input_dim,
            Model::SecondOrder(m) => m.input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.output_dim(),
            Model::General(m) => m.output_dim,
            Model::SecondOrder(m) => m.output_dim,
        }
    }

    pub fn masks(&self) -> DependencyMasks {
        match self {
            Model::Linear(m) => m.masks(),
            Model::General(m) => m.masks.clone(),
            Model::SecondOrder(m) => m.masks.clone(),
        }
    }

    pub fn as_linear(&self) -> Option<&LinearSystemModel<T>> {
        match self {
            Model::Linear(m) => Some(m),
            _ => None,
        }
    }
}

/// `[[A, b], [0, 0]]`; the augmented system started from `[x0; 1]` solves `x' = A x + b`.
pub fn augment_affine<T: Scalar>(a: &Matrix<T>, b: &Vector<T>) -> Result<Matrix<T>> {
    a.ensure_square()?;
    let n = a.rows();
    if b.len() != n {
        return Err(Error::mismatch("affine drive", n, b.len()));
    }
    let mut out = Matrix::zeros(n + 1, n + 1);
    out.set_block(0, 0, a);
    for i in 0..n {
        out[(i, n)] = b[i];
    }
    Ok(out)
}

/// Exact state at `t` of `x' = A x + b` (inputs ignored) via the matrix exponential.
pub fn analytical_solution<T: Scalar>(
    model: &LinearSystemModel<T>,
    drive: &AffineDrive<T>,
    t: T,
) -> Result<Vector<T>> {
    let n = model.state_dim();
    let aug = augment_affine(&model.a, &drive.b)?;
    let x0 = model.x0.concat(&Vector::new(vec![T::one()]));
    let full = mat_exp(&aug, t)?.mul_vec(&x0)?;
    Ok(full.slice(0, n))
}

/// Exact states on the uniform grid `0, h, 2h, ..., steps*h`, evaluated incrementally
/// with `x(t + h) = e^{A h} x(t)`.
pub fn analytical_series<T: Scalar>(
    model: &LinearSystemModel<T>,
    drive: &AffineDrive<T>,
    h: T,
    steps: usize,
) -> Result<Vec<Vector<T>>> {
    let n = model.state_dim();
    let aug = augment_affine(&model.a, &drive.b)?;
    let step = mat_exp(&aug, h)?;
    let mut x = model.x0.concat(&Vector::new(vec![T::one()]));
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x.slice(0, n));
    for _ in 0..steps {
        x = step.mul_vec(&x)?;
        out.push(x.slice(0, n));
    }
    Ok(out)
}
