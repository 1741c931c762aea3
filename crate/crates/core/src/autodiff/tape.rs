use std::fmt::Write as _;
use std::str::FromStr;

use super::tensor::{log_softmax_values, matmul_values, softmax_values, transpose_values};
use super::{AutodiffError, Tensor};
use crate::scalar::Real;

type Result<T> = std::result::Result<T, AutodiffError>;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operations understood by the tape.
///
/// Elementwise binaries require identical shapes. `Softmax`, `LogSoftmax`,
/// `Sum`, `Mean` and `Dot` act on all elements of their input(s).
/// `Gather`/`ScatterAdd`/`Concat` work along rows of rank-2 tensors.
#[derive(Debug, Clone, PartialEq)]
pub enum Op<T> {
    Leaf,
    Constant,
    Add,
    Sub,
    Mul,
    Div,
    MatMul,
    Transpose,
    Gather { rows: Vec<usize> },
    ScatterAdd { rows: Vec<usize>, out_rows: usize },
    Sum,
    Mean,
    Broadcast { shape: Vec<usize> },
    Tanh,
    Relu,
    Exp,
    Log,
    Softmax,
    LogSoftmax,
    Dot,
    Abs,
    Scale(T),
    Concat,
}

/// Tag-only view of [`Op`], used in traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpTag {
    Leaf,
    Constant,
    Add,
    Sub,
    Mul,
    Div,
    MatMul,
    Transpose,
    Gather,
    ScatterAdd,
    Sum,
    Mean,
    Broadcast,
    Tanh,
    Relu,
    Exp,
    Log,
    Softmax,
    LogSoftmax,
    Dot,
    Abs,
    Scale,
    Concat,
}

const TAGS: &[(OpTag, &str)] = &[
    (OpTag::Leaf, "leaf"),
    (OpTag::Constant, "const"),
    (OpTag::Add, "add"),
    (OpTag::Sub, "sub"),
    (OpTag::Mul, "mul"),
    (OpTag::Div, "div"),
    (OpTag::MatMul, "matmul"),
    (OpTag::Transpose, "transpose"),
    (OpTag::Gather, "gather"),
    (OpTag::ScatterAdd, "scatter_add"),
    (OpTag::Sum, "sum"),
    (OpTag::Mean, "mean"),
    (OpTag::Broadcast, "broadcast"),
    (OpTag::Tanh, "tanh"),
    (OpTag::Relu, "relu"),
    (OpTag::Exp, "exp"),
    (OpTag::Log, "log"),
    (OpTag::Softmax, "softmax"),
    (OpTag::LogSoftmax, "log_softmax"),
    (OpTag::Dot, "dot"),
    (OpTag::Abs, "abs"),
    (OpTag::Scale, "scale"),
    (OpTag::Concat, "concat"),
];

impl OpTag {
    pub fn name(self) -> &'static str {
        TAGS.iter().find(|(t, _)| *t == self).map(|(_, n)| *n).unwrap()
    }
}

impl FromStr for OpTag {
    type Err = AutodiffError;

    fn from_str(s: &str) -> Result<Self> {
        TAGS.iter()
            .find(|(_, n)| *n == s)
            .map(|(t, _)| *t)
            .ok_or_else(|| AutodiffError::UnknownOp(s.to_string()))
    }
}

impl<T> Op<T> {
    pub fn tag(&self) -> OpTag {
        match self {
            Op::Leaf => OpTag::Leaf,
            Op::Constant => OpTag::Constant,
            Op::Add => OpTag::Add,
            Op::Sub => OpTag::Sub,
            Op::Mul => OpTag::Mul,
            Op::Div => OpTag::Div,
            Op::MatMul => OpTag::MatMul,
            Op::Transpose => OpTag::Transpose,
            Op::Gather { .. } => OpTag::Gather,
            Op::ScatterAdd { .. } => OpTag::ScatterAdd,
            Op::Sum => OpTag::Sum,
            Op::Mean => OpTag::Mean,
            Op::Broadcast { .. } => OpTag::Broadcast,
            Op::Tanh => OpTag::Tanh,
            Op::Relu => OpTag::Relu,
            Op::Exp => OpTag::Exp,
            Op::Log => OpTag::Log,
            Op::Softmax => OpTag::Softmax,
            Op::LogSoftmax => OpTag::LogSoftmax,
            Op::Dot => OpTag::Dot,
            Op::Abs => OpTag::Abs,
            Op::Scale(_) => OpTag::Scale,
            Op::Concat => OpTag::Concat,
        }
    }

    fn name(&self) -> &'static str {
        self.tag().name()
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Op::Leaf | Op::Constant => Some(0),
            Op::Add | Op::Sub | Op::Mul | Op::Div | Op::MatMul | Op::Dot => Some(2),
            Op::Concat => None,
            _ => Some(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Node<T> {
    pub id: Var,
    pub op: Op<T>,
    pub inputs: Vec<Var>,
    pub value: Tensor<T>,
    pub requires_grad: bool,
    /// Backward-pass counter at the time the node was recorded; 0 for the
    /// forward pass.
    pub generation: u32,
}

/// Append-only record of a computation.
///
/// A tape has a single writer. Independent tapes may live on different
/// threads.
#[derive(Debug, Clone, Default)]
pub struct Tape<T = f64> {
    nodes: Vec<Node<T>>,
    generation: u32,
}

fn same_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(AutodiffError::ShapeMismatch {
            op,
            lhs: a.to_vec(),
            rhs: b.to_vec(),
        });
    }
    Ok(())
}

fn rank2(op: &'static str, t: &[usize]) -> Result<(usize, usize)> {
    match t {
        [r, c] => Ok((*r, *c)),
        _ => Err(AutodiffError::InvalidArgument(format!(
            "{op} expects a rank-2 tensor, got shape {t:?}"
        ))),
    }
}

/// Evaluates `op` on concrete input values.
pub(crate) fn eval<T: Real>(op: &Op<T>, inputs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let name = op.name();
    if let Some(n) = op.arity() {
        if inputs.len() != n {
            return Err(AutodiffError::Arity {
                op: name,
                expected: n,
                got: inputs.len(),
            });
        }
    }
    let unary = |f: &dyn Fn(T) -> T| -> Result<Tensor<T>> {
        let x = inputs[0];
        Tensor::from_kernel(name, x.shape().to_vec(), x.map(f))
    };
    match op {
        Op::Leaf | Op::Constant => Err(AutodiffError::InvalidArgument(
            "leaves carry their own value".into(),
        )),
        Op::Add | Op::Sub | Op::Mul | Op::Div => {
            let (a, b) = (inputs[0], inputs[1]);
            same_shape(name, a.shape(), b.shape())?;
            let values = match op {
                Op::Add => a.zip_map(b, |x, y| x + y),
                Op::Sub => a.zip_map(b, |x, y| x - y),
                Op::Mul => a.zip_map(b, |x, y| x * y),
                _ => a.zip_map(b, |x, y| x / y),
            };
            Tensor::from_kernel(name, a.shape().to_vec(), values)
        }
        Op::MatMul => {
            let (a, b) = (inputs[0], inputs[1]);
            let (n, k) = rank2(name, a.shape())?;
            let (k2, m) = rank2(name, b.shape())?;
            if k != k2 {
                return Err(AutodiffError::ShapeMismatch {
                    op: name,
                    lhs: a.shape().to_vec(),
                    rhs: b.shape().to_vec(),
                });
            }
            Tensor::from_kernel(name, vec![n, m], matmul_values(a.values(), b.values(), n, k, m))
        }
        Op::Transpose => {
            let a = inputs[0];
            let (r, c) = rank2(name, a.shape())?;
            Tensor::from_kernel(name, vec![c, r], transpose_values(a.values(), r, c))
        }
        Op::Gather { rows } => {
            let a = inputs[0];
            let (r, c) = rank2(name, a.shape())?;
            let mut out = Vec::with_capacity(rows.len() * c);
            for &idx in rows {
                if idx >= r {
                    return Err(AutodiffError::InvalidArgument(format!(
                        "gather row {idx} out of range for {r} rows"
                    )));
                }
                out.extend_from_slice(a.row(idx));
            }
            Tensor::from_kernel(name, vec![rows.len(), c], out)
        }
        Op::ScatterAdd { rows, out_rows } => {
            let a = inputs[0];
            let (r, c) = rank2(name, a.shape())?;
            if r != rows.len() {
                return Err(AutodiffError::InvalidArgument(format!(
                    "scatter_add has {} indices for {r} rows",
                    rows.len()
                )));
            }
            let mut out = vec![T::zero(); out_rows * c];
            for (src, &dst) in rows.iter().enumerate() {
                if dst >= *out_rows {
                    return Err(AutodiffError::InvalidArgument(format!(
                        "scatter_add row {dst} out of range for {out_rows} rows"
                    )));
                }
                for (o, &v) in out[dst * c..(dst + 1) * c].iter_mut().zip(a.row(src)) {
                    *o = *o + v;
                }
            }
            Tensor::from_kernel(name, vec![*out_rows, c], out)
        }
        Op::Sum => {
            let total = inputs[0].values().iter().copied().sum();
            Tensor::from_kernel(name, vec![], vec![total])
        }
        Op::Mean => {
            let x = inputs[0];
            if x.is_empty() {
                return Err(AutodiffError::InvalidArgument("mean of empty tensor".into()));
            }
            let total: T = x.values().iter().copied().sum();
            Tensor::from_kernel(name, vec![], vec![total / T::lit(x.len() as f64)])
        }
        Op::Broadcast { shape } => {
            let x = inputs[0];
            if !x.is_scalar() {
                return Err(AutodiffError::InvalidArgument(format!(
                    "broadcast expects a single-element input, got {:?}",
                    x.shape()
                )));
            }
            if shape.len() > 2 {
                return Err(AutodiffError::InvalidArgument("broadcast rank > 2".into()));
            }
            let n = shape.iter().product();
            Tensor::from_kernel(name, shape.clone(), vec![x.item(); n])
        }
        Op::Tanh => unary(&|v| v.tanh()),
        Op::Relu => unary(&|v| v.max(T::zero())),
        Op::Exp => unary(&|v| v.exp()),
        Op::Log => unary(&|v| v.ln()),
        Op::Abs => unary(&|v| v.abs()),
        Op::Scale(c) => {
            let c = *c;
            unary(&move |v| v * c)
        }
        Op::Softmax | Op::LogSoftmax => {
            let x = inputs[0];
            if x.is_empty() {
                return Err(AutodiffError::InvalidArgument(format!("{name} of empty tensor")));
            }
            let values = if matches!(op, Op::Softmax) {
                softmax_values(x.values())
            } else {
                log_softmax_values(x.values())
            };
            Tensor::from_kernel(name, x.shape().to_vec(), values)
        }
        Op::Dot => {
            let (a, b) = (inputs[0], inputs[1]);
            same_shape(name, a.shape(), b.shape())?;
            let total = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(&x, &y)| x * y)
                .sum();
            Tensor::from_kernel(name, vec![], vec![total])
        }
        Op::Concat => {
            if inputs.is_empty() {
                return Err(AutodiffError::Arity {
                    op: name,
                    expected: 1,
                    got: 0,
                });
            }
            let (_, cols) = rank2(name, inputs[0].shape())?;
            let mut rows = 0;
            let mut out = Vec::new();
            for t in inputs {
                let (r, c) = rank2(name, t.shape())?;
                if c != cols {
                    return Err(AutodiffError::ShapeMismatch {
                        op: name,
                        lhs: inputs[0].shape().to_vec(),
                        rhs: t.shape().to_vec(),
                    });
                }
                rows += r;
                out.extend_from_slice(t.values());
            }
            Tensor::from_kernel(name, vec![rows, cols], out)
        }
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            generation: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn node(&self, v: Var) -> &Node<T> {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Scalar value of a single-element node.
    pub fn item(&self, v: Var) -> T {
        self.nodes[v.0].value.item()
    }

    fn push(&mut self, op: Op<T>, inputs: Vec<Var>, value: Tensor<T>, requires_grad: bool) -> Var {
        let id = Var(self.nodes.len());
        self.nodes.push(Node {
            id,
            op,
            inputs,
            value,
            requires_grad,
            generation: self.generation,
        });
        id
    }

    /// Differentiable input.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(Op::Leaf, Vec::new(), value, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(Op::Constant, Vec::new(), value, false)
    }

    /// Evaluates `op` on `inputs` and appends the result.
    pub fn record(&mut self, op: Op<T>, inputs: &[Var]) -> Result<Var> {
        if matches!(op, Op::Leaf | Op::Constant) {
            return Err(AutodiffError::InvalidArgument(
                "use Tape::leaf or Tape::constant for inputs".into(),
            ));
        }
        for v in inputs {
            if v.0 >= self.nodes.len() {
                return Err(AutodiffError::UnknownNode(v.0));
            }
        }
        let values: Vec<&Tensor<T>> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
        let value = eval(&op, &values)?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(op, inputs.to_vec(), value, requires_grad))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Add, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Mul, &[a, b])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Div, &[a, b])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::MatMul, &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Transpose, &[a])
    }

    pub fn gather(&mut self, a: Var, rows: Vec<usize>) -> Result<Var> {
        self.record(Op::Gather { rows }, &[a])
    }

    pub fn scatter_add(&mut self, a: Var, rows: Vec<usize>, out_rows: usize) -> Result<Var> {
        self.record(Op::ScatterAdd { rows, out_rows }, &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sum, &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Mean, &[a])
    }

    pub fn broadcast(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        self.record(
            Op::Broadcast {
                shape: shape.to_vec(),
            },
            &[a],
        )
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Tanh, &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Relu, &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Exp, &[a])
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Log, &[a])
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Softmax, &[a])
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        self.record(Op::LogSoftmax, &[a])
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Dot, &[a, b])
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Abs, &[a])
    }

    pub fn scale(&mut self, a: Var, c: T) -> Result<Var> {
        self.record(Op::Scale(c), &[a])
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        self.record(Op::Concat, parts)
    }

    /// Gradients of `target` with respect to `wrt`, as plain tensors.
    ///
    /// Nodes recorded by the backward pass are discarded afterwards. A `wrt`
    /// node that `target` does not depend on gets a zero tensor.
    pub fn grad(&mut self, target: Var, wrt: &[Var]) -> Result<Vec<Tensor<T>>> {
        let mark = self.nodes.len();
        let result = self.backward(target, wrt);
        let out = result.map(|vars| vars.iter().map(|v| self.value(*v).clone()).collect());
        self.nodes.truncate(mark);
        out
    }

    /// Gradients of `target` with respect to `wrt`, recorded on the tape so
    /// they can be differentiated again.
    pub fn grad_graph(&mut self, target: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        self.backward(target, wrt)
    }

    /// Dispatches on `create_graph`; gradients come back as tensors either way.
    /// Use [`Tape::grad_graph`] to keep the nodes.
    pub fn grad_with(&mut self, target: Var, wrt: &[Var], create_graph: bool) -> Result<Vec<Tensor<T>>> {
        if create_graph {
            let vars = self.grad_graph(target, wrt)?;
            Ok(vars.iter().map(|v| self.value(*v).clone()).collect())
        } else {
            self.grad(target, wrt)
        }
    }

    fn backward(&mut self, target: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        let n = self.nodes.len();
        if target.0 >= n {
            return Err(AutodiffError::UnknownNode(target.0));
        }
        if let Some(w) = wrt.iter().find(|w| w.0 >= n) {
            return Err(AutodiffError::UnknownNode(w.0));
        }
        let target_shape = self.shape(target).to_vec();
        if !self.value(target).is_scalar() {
            return Err(AutodiffError::NotScalar(target_shape));
        }
        self.generation += 1;

        let end = target.0 + 1;
        let mut needs = vec![false; end];
        for w in wrt {
            if w.0 < end {
                needs[w.0] = true;
            }
        }
        for i in 0..end {
            if !needs[i] && self.nodes[i].inputs.iter().any(|v| needs[v.0]) {
                needs[i] = true;
            }
        }

        let mut adjoint: Vec<Option<Var>> = vec![None; end];
        if needs[target.0] {
            adjoint[target.0] = Some(self.constant(Tensor::ones(&target_shape)));
        }
        for i in (0..end).rev() {
            if !needs[i] {
                continue;
            }
            let Some(dy) = adjoint[i] else { continue };
            let inputs = self.nodes[i].inputs.clone();
            for (pos, input) in inputs.iter().enumerate() {
                if !needs[input.0] {
                    continue;
                }
                let contrib = self.vjp(Var(i), pos, dy)?;
                adjoint[input.0] = Some(match adjoint[input.0] {
                    Some(acc) => self.add(acc, contrib)?,
                    None => contrib,
                });
            }
        }

        wrt.iter()
            .map(|w| match adjoint.get(w.0).copied().flatten() {
                Some(v) => Ok(v),
                None => {
                    let shape = self.shape(*w).to_vec();
                    Ok(self.constant(Tensor::zeros(&shape)))
                }
            })
            .collect()
    }

    /// Vector-Jacobian product of node `y` for its input at position `pos`,
    /// expressed in recorded primitives.
    fn vjp(&mut self, y: Var, pos: usize, dy: Var) -> Result<Var> {
        let node = &self.nodes[y.0];
        let op = node.op.clone();
        let inputs = node.inputs.clone();
        let x = inputs[pos];
        let x_shape = self.shape(x).to_vec();
        match op {
            Op::Leaf | Op::Constant => unreachable!("leaves have no inputs"),
            Op::Add => Ok(dy),
            Op::Sub => {
                if pos == 0 {
                    Ok(dy)
                } else {
                    self.scale(dy, -T::one())
                }
            }
            Op::Mul => self.mul(dy, inputs[1 - pos]),
            Op::Div => {
                let b = inputs[1];
                if pos == 0 {
                    self.div(dy, b)
                } else {
                    // d(a/b)/db = -y/b
                    let q = self.div(y, b)?;
                    let t = self.mul(dy, q)?;
                    self.scale(t, -T::one())
                }
            }
            Op::MatMul => {
                if pos == 0 {
                    let bt = self.transpose(inputs[1])?;
                    self.matmul(dy, bt)
                } else {
                    let at = self.transpose(inputs[0])?;
                    self.matmul(at, dy)
                }
            }
            Op::Transpose => self.transpose(dy),
            Op::Gather { rows } => self.scatter_add(dy, rows, x_shape[0]),
            Op::ScatterAdd { rows, .. } => self.gather(dy, rows),
            Op::Sum => self.broadcast(dy, &x_shape),
            Op::Mean => {
                let n = T::lit(self.value(x).len() as f64);
                let b = self.broadcast(dy, &x_shape)?;
                self.scale(b, T::one() / n)
            }
            Op::Broadcast { .. } => {
                let s = self.sum(dy)?;
                if x_shape.is_empty() {
                    Ok(s)
                } else {
                    self.broadcast(s, &x_shape)
                }
            }
            Op::Tanh => {
                let one = self.constant(Tensor::ones(&x_shape));
                let sq = self.mul(y, y)?;
                let d = self.sub(one, sq)?;
                self.mul(dy, d)
            }
            Op::Relu => {
                let mask = Tensor::from_kernel(
                    "relu",
                    x_shape.clone(),
                    self.value(x).map(|v| if v > T::zero() { T::one() } else { T::zero() }),
                )?;
                let m = self.constant(mask);
                self.mul(dy, m)
            }
            Op::Abs => {
                // subgradient 0 at the kink
                let sign = Tensor::from_kernel(
                    "abs",
                    x_shape.clone(),
                    self.value(x).map(|v| {
                        if v > T::zero() {
                            T::one()
                        } else if v < T::zero() {
                            -T::one()
                        } else {
                            T::zero()
                        }
                    }),
                )?;
                let s = self.constant(sign);
                self.mul(dy, s)
            }
            Op::Exp => self.mul(dy, y),
            Op::Log => self.div(dy, x),
            Op::Scale(c) => self.scale(dy, c),
            Op::Softmax => {
                let t = self.dot(dy, y)?;
                let tb = self.broadcast(t, &x_shape)?;
                let d = self.sub(dy, tb)?;
                self.mul(y, d)
            }
            Op::LogSoftmax => {
                let s = self.exp(y)?;
                let total = self.sum(dy)?;
                let tb = self.broadcast(total, &x_shape)?;
                let st = self.mul(s, tb)?;
                self.sub(dy, st)
            }
            Op::Dot => {
                let b = self.broadcast(dy, &x_shape)?;
                self.mul(b, inputs[1 - pos])
            }
            Op::Concat => {
                let offset: usize = inputs[..pos].iter().map(|v| self.shape(*v)[0]).sum();
                let rows = (offset..offset + x_shape[0]).collect();
                self.gather(dy, rows)
            }
        }
    }

    /// Re-evaluates every recorded op from its inputs and checks the cached
    /// values are reproduced bit for bit. Returns the first mismatching node.
    pub fn replay(&self) -> std::result::Result<(), Var> {
        for node in &self.nodes {
            if matches!(node.op, Op::Leaf | Op::Constant) {
                continue;
            }
            let inputs: Vec<&Tensor<T>> = node.inputs.iter().map(|v| self.value(*v)).collect();
            match eval(&node.op, &inputs) {
                Ok(v) if v.bit_eq(&node.value) => {}
                _ => return Err(node.id),
            }
        }
        Ok(())
    }

    /// Line-oriented dump: `id op inputs shape generation`.
    pub fn trace(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            let inputs: Vec<String> = node.inputs.iter().map(|v| v.0.to_string()).collect();
            let _ = writeln!(
                out,
                "{} {} [{}] {:?} g{}",
                node.id.0,
                node.op.name(),
                inputs.join(","),
                node.value.shape(),
                node.generation
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> Tensor {
        Tensor::scalar(v).unwrap()
    }

    #[test]
    fn record_add_and_shapes() {
        let mut t = Tape::new();
        let a = t.leaf(s(2.0));
        let b = t.leaf(s(3.0));
        let c = t.add(a, b).unwrap();
        assert_eq!(t.item(c), 5.0);

        let m = t.leaf(Tensor::matrix(2, 3, vec![1.0; 6]).unwrap());
        let v = t.leaf(Tensor::matrix(3, 1, vec![1.0; 3]).unwrap());
        let p = t.matmul(m, v).unwrap();
        assert_eq!(t.shape(p), &[2, 1]);

        let w = t.leaf(Tensor::matrix(3, 2, vec![1.0; 6]).unwrap());
        assert!(matches!(
            t.add(m, w),
            Err(AutodiffError::ShapeMismatch { op: "add", .. })
        ));
    }

    #[test]
    fn op_tags_parse_and_reject_unknown() {
        assert_eq!("matmul".parse::<OpTag>().unwrap(), OpTag::MatMul);
        assert!(matches!(
            "conv2d".parse::<OpTag>(),
            Err(AutodiffError::UnknownOp(_))
        ));
        for (tag, name) in TAGS {
            assert_eq!(name.parse::<OpTag>().unwrap(), *tag);
        }
    }

    #[test]
    fn square_and_cube_derivatives() {
        let mut t = Tape::new();
        let x = t.leaf(s(3.0));
        let y = t.mul(x, x).unwrap();
        let g = t.grad(y, &[x]).unwrap();
        assert_eq!(g[0].item(), 6.0);

        let mut t = Tape::new();
        let x = t.leaf(s(2.0));
        let x2 = t.mul(x, x).unwrap();
        let x3 = t.mul(x2, x).unwrap();
        let g = t.grad_graph(x3, &[x]).unwrap()[0];
        assert_eq!(t.item(g), 12.0);
        let gg = t.grad(g, &[x]).unwrap();
        assert_eq!(gg[0].item(), 12.0);
    }

    #[test]
    fn softmax_cross_entropy_gradient_at_uniform_logits() {
        let mut t = Tape::<f64>::new();
        let logits = t.leaf(Tensor::vector(vec![0.0, 0.0, 0.0]).unwrap());
        let ls = t.log_softmax(logits).unwrap();
        let onehot = t.constant(Tensor::vector(vec![1.0, 0.0, 0.0]).unwrap());
        let picked = t.dot(ls, onehot).unwrap();
        let loss = t.scale(picked, -1.0).unwrap();
        let g = t.grad(loss, &[logits]).unwrap();
        let expected = [-2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        for (a, b) in g[0].values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn unreachable_wrt_yields_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let z = t.leaf(Tensor::vector(vec![5.0, 6.0]).unwrap());
        let y = t.sum(x).unwrap();
        let g = t.grad(y, &[x, z]).unwrap();
        assert_eq!(g[0].values(), &[1.0, 1.0]);
        assert_eq!(g[1].values(), &[0.0, 0.0]);
    }

    #[test]
    fn non_scalar_target_is_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let y = t.tanh(x).unwrap();
        assert!(matches!(t.grad(y, &[x]), Err(AutodiffError::NotScalar(_))));
    }

    #[test]
    fn abs_subgradient_at_zero() {
        let mut t = Tape::new();
        let x = t.leaf(s(0.0));
        let y = t.abs(x).unwrap();
        assert_eq!(t.grad(y, &[x]).unwrap()[0].item(), 0.0);
    }

    #[test]
    fn log_of_non_positive_is_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(s(-1.0));
        assert!(matches!(t.log(x), Err(AutodiffError::NonFinite { .. })));
    }

    #[test]
    fn grad_discards_backward_nodes_but_graph_keeps_them() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![0.3, -0.2]).unwrap());
        let y = t.tanh(x).unwrap();
        let z = t.sum(y).unwrap();
        let before = t.len();
        let plain = t.grad(z, &[x]).unwrap();
        assert_eq!(t.len(), before);
        let g = t.grad_graph(z, &[x]).unwrap()[0];
        assert!(t.len() > before);
        assert!(t.value(g).bit_eq(&plain[0]));
        assert!(t.nodes().iter().skip(before).all(|n| n.generation >= 1));
        assert!(t.replay().is_ok());
    }

    #[test]
    fn trace_lists_every_node() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0]).unwrap());
        let _ = t.exp(x).unwrap();
        let trace = t.trace();
        assert_eq!(trace.lines().count(), 2);
        assert!(trace.lines().nth(1).unwrap().starts_with("1 exp [0] [1]"));
    }
}
