//! Canonical text form with minimal parentheses.

use super::{BinaryOp, Expr, ExprKind};

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Const(v) if *v < 0.0 || v.is_sign_negative() => PREC_NEG,
        ExprKind::Const(_) | ExprKind::State(_) | ExprKind::Call(..) => PREC_ATOM,
        ExprKind::Neg(_) => PREC_NEG,
        ExprKind::Binary(op, ..) => match op {
            BinaryOp::Add | BinaryOp::Sub => PREC_ADD,
            BinaryOp::Mul | BinaryOp::Div => PREC_MUL,
            BinaryOp::Pow => PREC_POW,
        },
    }
}

fn write_child(e: &Expr, min_prec: u8, out: &mut String) {
    if precedence(e) < min_prec {
        out.push('(');
        write_expr(e, out);
        out.push(')');
    } else {
        write_expr(e, out);
    }
}

fn write_expr(e: &Expr, out: &mut String) {
    match &e.kind {
        ExprKind::Const(v) => out.push_str(&v.to_string()),
        ExprKind::State(i) => {
            out.push_str("s[");
            out.push_str(&i.to_string());
            out.push(']');
        }
        ExprKind::Neg(a) => {
            out.push('-');
            write_child(a, PREC_NEG, out);
        }
        ExprKind::Binary(op, l, r) => {
            let (lp, rp) = match op {
                BinaryOp::Add | BinaryOp::Sub => (PREC_ADD, PREC_MUL),
                BinaryOp::Mul | BinaryOp::Div => (PREC_MUL, PREC_NEG),
                // The base of a power is always a primary; the exponent may be negated.
                BinaryOp::Pow => (PREC_ATOM, PREC_NEG),
            };
            write_child(l, lp, out);
            if *op == BinaryOp::Pow {
                out.push('^');
            } else {
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
            }
            write_child(r, rp, out);
        }
        ExprKind::Call(f, args) => {
            out.push_str(f.name());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(a, out);
            }
            out.push(')');
        }
    }
}

/// Formats one expression. Negative constants (which the parser never
/// produces) print as `-x` and reparse as a negation.
pub fn format_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(e, &mut s);
    s
}

pub(super) fn format_program(outputs: &[Expr]) -> String {
    outputs
        .iter()
        .map(|e| format!("out: {}", format_expr(e)))
        .collect::<Vec<_>>()
        .join("\n")
}
