//! Postfix evaluation of compiled programs.

use super::{BinaryOp, DslError, Expr, ExprKind, Func};

/// Outputs are clamped to `[-OUTPUT_CLAMP, OUTPUT_CLAMP]`.
pub const OUTPUT_CLAMP: f64 = 1e6;
/// `log(x)` evaluates `log(max(x, LOG_FLOOR))`.
pub const LOG_FLOOR: f64 = 1e-12;
/// Denominators smaller in magnitude are replaced by `±DENOMINATOR_FLOOR`.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Load(usize),
    Neg,
    Bin(BinaryOp),
    Unary(Func),
    Binary(Func),
}

#[derive(Debug, Clone, Default)]
pub(super) struct Compiled {
    outputs: Vec<Vec<Op>>,
    max_stack: usize,
}

impl Compiled {
    pub fn new(outputs: &[Expr]) -> Self {
        let mut max_stack = 0;
        let outputs = outputs
            .iter()
            .map(|e| {
                let mut ops = Vec::new();
                emit(e, &mut ops);
                max_stack = max_stack.max(stack_need(&ops));
                ops
            })
            .collect();
        Compiled { outputs, max_stack }
    }

    pub fn eval_into(&self, input: &[f64], out: &mut Vec<f64>) -> Result<(), DslError> {
        let mut stack: Vec<f64> = Vec::with_capacity(self.max_stack);
        for (k, ops) in self.outputs.iter().enumerate() {
            stack.clear();
            for op in ops {
                match *op {
                    Op::Const(v) => stack.push(v),
                    Op::Load(i) => stack.push(input[i]),
                    Op::Neg => {
                        let a = stack.pop().expect("stack");
                        stack.push(-a);
                    }
                    Op::Bin(b) => {
                        let r = stack.pop().expect("stack");
                        let l = stack.pop().expect("stack");
                        stack.push(binary(b, l, r));
                    }
                    Op::Unary(f) => {
                        let a = stack.pop().expect("stack");
                        stack.push(unary(f, a));
                    }
                    Op::Binary(f) => {
                        let b = stack.pop().expect("stack");
                        let a = stack.pop().expect("stack");
                        stack.push(if f == Func::Min { a.min(b) } else { a.max(b) });
                    }
                }
            }
            let v = stack.pop().expect("stack");
            out.push(clamp_output(v, k)?);
        }
        Ok(())
    }
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    match &e.kind {
        ExprKind::Const(v) => ops.push(Op::Const(*v)),
        ExprKind::State(i) => ops.push(Op::Load(*i)),
        ExprKind::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        ExprKind::Binary(op, l, r) => {
            emit(l, ops);
            emit(r, ops);
            ops.push(Op::Bin(*op));
        }
        ExprKind::Call(f, args) => {
            args.iter().for_each(|a| emit(a, ops));
            ops.push(if f.arity() == 2 {
                Op::Binary(*f)
            } else {
                Op::Unary(*f)
            });
        }
    }
}

fn stack_need(ops: &[Op]) -> usize {
    let (mut depth, mut max) = (0usize, 0usize);
    for op in ops {
        match op {
            Op::Const(_) | Op::Load(_) => depth += 1,
            Op::Neg | Op::Unary(_) => {}
            Op::Bin(_) | Op::Binary(_) => depth -= 1,
        }
        max = max.max(depth);
    }
    max
}

fn binary(op: BinaryOp, l: f64, r: f64) -> f64 {
    match op {
        BinaryOp::Add => l + r,
        BinaryOp::Sub => l - r,
        BinaryOp::Mul => l * r,
        BinaryOp::Div => {
            let d = if r.abs() < DENOMINATOR_FLOOR {
                DENOMINATOR_FLOOR.copysign(r)
            } else {
                r
            };
            l / d
        }
        // Integral exponents use repeated multiplication so that `x^2` is exactly `x * x`.
        BinaryOp::Pow => {
            if r.fract() == 0.0 && r.abs() <= 1024.0 {
                l.powi(r as i32)
            } else {
                l.powf(r)
            }
        }
    }
}

fn unary(f: Func, a: f64) -> f64 {
    match f {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Tan => a.tan(),
        Func::Tanh => a.tanh(),
        Func::Abs => a.abs(),
        Func::Sqrt => a.max(0.0).sqrt(),
        Func::Exp => a.exp(),
        Func::Log => a.max(LOG_FLOOR).ln(),
        Func::Min | Func::Max => unreachable!("binary function"),
    }
}

fn clamp_output(v: f64, output: usize) -> Result<f64, DslError> {
    if v.is_nan() {
        return Err(DslError::NonFinite { output });
    }
    Ok(v.clamp(-OUTPUT_CLAMP, OUTPUT_CLAMP))
}
