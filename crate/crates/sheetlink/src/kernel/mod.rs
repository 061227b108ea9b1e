//! The compute side of the hybrid application: a workspace of named
//! values plus an evaluator for the command language.

pub mod builtins;
pub mod parse;

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::optim::{self, FrontierResult};
use crate::value::{Matrix, Value};
use crate::workbook::is_identifier;

pub use parse::{parse_command, pretty_print, Command, Expr, PlotDirective, Statement};

/// Named values visible to commands. Lookup of an unbound name is always
/// an error, never an implicit empty value.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    bindings: BTreeMap<String, Value>,
}

impl Workspace {
    pub fn new() -> Workspace {
        Workspace::default()
    }

    pub fn get(&self, name: &str) -> Result<&Value> {
        self.bindings
            .get(name)
            .ok_or_else(|| Error::Eval(format!("unbound identifier '{name}'")))
    }

    pub fn bind(&mut self, name: &str, value: Value) -> Result<()> {
        if !is_identifier(name) {
            return Err(Error::Eval(format!("invalid identifier '{name}'")));
        }
        self.bindings.insert(name.to_string(), value);
        Ok(())
    }

    pub fn unbind(&mut self, name: &str) -> Result<()> {
        self.bindings
            .remove(name)
            .map(|_| ())
            .ok_or_else(|| Error::Eval(format!("unbound identifier '{name}'")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bindings.keys().map(|s| s.as_str())
    }

    /// Content digest over all bindings; used for transactionality checks
    /// and audit records.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (name, value) in &self.bindings {
            hasher.update(name.as_bytes());
            hasher.update(b"=");
            hasher.update(value.canonical().as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

/// Plot directive with its argument resolved to text.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedDirective {
    GridOn,
    XLabel(String),
    YLabel(String),
}

/// Side effects of evaluating one command string.
#[derive(Debug, Clone, Default)]
pub struct EvalOutput {
    /// Names bound or rebound, in evaluation order.
    pub assigned: Vec<String>,
    /// Frontier data captured from a zero-target portopt call.
    pub plot: Option<FrontierResult>,
    /// Plot annotations seen after (or before) the data-producing call.
    pub directives: Vec<ResolvedDirective>,
}

/// Evaluate a parsed command against a workspace. Evaluation is
/// transactional per command string: on error the input workspace is
/// returned untouched.
pub fn eval_command(ws: &Workspace, cmd: &Command) -> Result<(Workspace, EvalOutput)> {
    let mut next = ws.clone();
    let mut out = EvalOutput::default();
    for st in cmd {
        eval_statement(&mut next, st, &mut out)?;
    }
    Ok((next, out))
}

fn eval_statement(ws: &mut Workspace, st: &Statement, out: &mut EvalOutput) -> Result<()> {
    match st {
        Statement::Assign { target, expr } => {
            let value = eval_single(ws, expr)?;
            ws.bind(target, value)?;
            out.assigned.push(target.clone());
        }
        Statement::MultiAssign { targets, call } => {
            let values = eval_multi(ws, call, targets.len())?;
            for (target, value) in targets.iter().zip(values) {
                ws.bind(target, value)?;
                out.assigned.push(target.clone());
            }
        }
        Statement::Expr(expr) => {
            // a bare portopt call is the plot-producing form
            if let Expr::Call { name, args } = expr {
                if name == "portopt" {
                    let frontier = eval_portopt(ws, args)?;
                    out.plot = Some(frontier);
                    return Ok(());
                }
            }
            eval_single(ws, expr)?;
        }
        Statement::Plot(directive) => {
            let resolved = match directive {
                PlotDirective::GridOn => ResolvedDirective::GridOn,
                PlotDirective::XLabel(e) => ResolvedDirective::XLabel(eval_label(ws, e)?),
                PlotDirective::YLabel(e) => ResolvedDirective::YLabel(eval_label(ws, e)?),
            };
            out.directives.push(resolved);
        }
    }
    Ok(())
}

fn eval_label(ws: &Workspace, expr: &Expr) -> Result<String> {
    match eval_single(ws, expr)? {
        Value::Strings(list) if list.len() == 1 => Ok(list[0].clone()),
        Value::Strings(list) => Err(Error::Eval(format!(
            "label expects one string, got {}",
            list.len()
        ))),
        Value::Matrix(_) => Err(Error::TypeDim("label expects a string".into())),
    }
}

fn eval_single(ws: &Workspace, expr: &Expr) -> Result<Value> {
    Ok(match expr {
        Expr::Ident(name) => ws.get(name)?.clone(),
        Expr::Number(v) => Value::Matrix(Matrix::scalar(*v)?),
        Expr::Str(s) => Value::Strings(vec![s.clone()]),
        Expr::Call { .. } => {
            let mut values = eval_call(ws, expr, 1)?;
            values.swap_remove(0)
        }
        Expr::ColIndex { base, col } => {
            let m = expect_matrix(eval_single(ws, base)?)?;
            let column = m.column(*col)?;
            Value::Matrix(Matrix::new(column.len(), 1, column)?)
        }
        Expr::RowIndex { base, row } => {
            let m = expect_matrix(eval_single(ws, base)?)?;
            let row_data = m.row(*row)?;
            Value::Matrix(Matrix::new(1, row_data.len(), row_data)?)
        }
        Expr::CellIndex { base, index } => match eval_single(ws, base)? {
            Value::Strings(list) => {
                let item = list.get(*index - 1).ok_or_else(|| {
                    Error::Eval(format!(
                        "index {index} out of range for string list of length {}",
                        list.len()
                    ))
                })?;
                Value::Strings(vec![item.clone()])
            }
            Value::Matrix(_) => {
                return Err(Error::TypeDim("'{..}' indexing needs a string list".into()))
            }
        },
    })
}

fn eval_multi(ws: &Workspace, call: &Expr, wanted: usize) -> Result<Vec<Value>> {
    eval_call(ws, call, wanted)
}

/// Declared output counts for the builtins.
fn builtin_outputs(name: &str) -> Option<usize> {
    match name {
        "identity" | "mean" | "var" | "cov" | "qqplot" => Some(1),
        "ewstats" | "blackscholes" => Some(2),
        "portopt" => Some(3),
        _ => None,
    }
}

fn eval_call(ws: &Workspace, call: &Expr, wanted: usize) -> Result<Vec<Value>> {
    let (name, args) = match call {
        Expr::Call { name, args } => (name.as_str(), args),
        _ => return Err(Error::Eval("expected a function call".into())),
    };
    let declared = builtin_outputs(name)
        .ok_or_else(|| Error::Eval(format!("unknown function '{name}'")))?;
    if wanted > declared {
        return Err(Error::Eval(format!(
            "'{name}' returns {declared} output(s), {wanted} requested"
        )));
    }
    let values: Vec<Value> = args
        .iter()
        .map(|a| eval_single(ws, a))
        .collect::<Result<_>>()?;
    match name {
        "identity" => {
            if values.len() != 1 {
                return Err(Error::Eval(format!(
                    "'identity' expects 1 argument, got {}",
                    values.len()
                )));
            }
            Ok(vec![values[0].clone()])
        }
        "mean" => Ok(vec![Value::Matrix(builtins::mean(&one_matrix(
            name, &values,
        )?)?)]),
        "var" => Ok(vec![Value::Matrix(builtins::var(&one_matrix(
            name, &values,
        )?)?)]),
        "cov" => Ok(vec![Value::Matrix(builtins::cov(&one_matrix(
            name, &values,
        )?)?)]),
        "qqplot" => {
            let [x, y] = matrix_args::<2>(name, &values)?;
            Ok(vec![Value::Matrix(builtins::qqplot(&x, &y)?)])
        }
        "ewstats" => {
            if values.is_empty() || values.len() > 2 {
                return Err(Error::Eval(format!(
                    "ewstats expects 1 or 2 arguments, got {}",
                    values.len()
                )));
            }
            let returns = as_matrix(name, &values[0])?;
            let decay = match values.get(1) {
                Some(v) => scalar_arg(name, v)?,
                None => 1.0,
            };
            let (mu, sigma) = builtins::ewstats(returns, decay)?;
            Ok(vec![Value::Matrix(mu), Value::Matrix(sigma)])
        }
        "blackscholes" => {
            if values.len() != 5 {
                return Err(Error::Eval(format!(
                    "blackscholes expects 5 arguments, got {}",
                    values.len()
                )));
            }
            let s: Vec<f64> = values
                .iter()
                .map(|v| scalar_arg(name, v))
                .collect::<Result<_>>()?;
            let (call_px, put_px) = builtins::blackscholes(s[0], s[1], s[2], s[3], s[4])?;
            Ok(vec![
                Value::Matrix(Matrix::scalar(call_px)?),
                Value::Matrix(Matrix::scalar(put_px)?),
            ])
        }
        "portopt" => {
            let frontier = eval_portopt_values(&values)?;
            frontier_outputs(&frontier)
        }
        _ => unreachable!("declared builtins handled above"),
    }
}

/// Apply a builtin to one value, returning its first output. This is the
/// single-argument form the grid-side `matlabfcn`/`matlabsub` calls use.
pub fn apply_builtin(name: &str, arg: &Value) -> Result<Value> {
    let mut ws = Workspace::new();
    ws.bind("fcnarg", arg.clone())?;
    let call = Expr::Call {
        name: name.to_string(),
        args: vec![Expr::Ident("fcnarg".into())],
    };
    let mut values = eval_call(&ws, &call, 1)?;
    Ok(values.swap_remove(0))
}

fn eval_portopt(ws: &Workspace, args: &[Expr]) -> Result<FrontierResult> {
    let values: Vec<Value> = args
        .iter()
        .map(|a| eval_single(ws, a))
        .collect::<Result<_>>()?;
    eval_portopt_values(&values)
}

fn eval_portopt_values(values: &[Value]) -> Result<FrontierResult> {
    if values.len() != 3 {
        return Err(Error::Eval(format!(
            "portopt expects 3 arguments, got {}",
            values.len()
        )));
    }
    let mu_m = as_matrix("portopt", &values[0])?;
    if mu_m.rows() != 1 {
        return Err(Error::TypeDim(format!(
            "portopt expected returns must be a row vector, got {}x{}",
            mu_m.rows(),
            mu_m.cols()
        )));
    }
    let sigma = as_matrix("portopt", &values[1])?;
    let npts = scalar_arg("portopt", &values[2])?;
    if npts < 2.0 || npts.fract() != 0.0 {
        return Err(Error::Eval(format!(
            "portopt point count must be an integer >= 2, got {npts}"
        )));
    }
    optim::portopt(mu_m.data(), sigma, npts as usize)
}

/// risk, ror, weights matrices from a frontier.
pub fn frontier_outputs(frontier: &FrontierResult) -> Result<Vec<Value>> {
    let n = frontier.points.len();
    let k = frontier.mu.len();
    let risk: Vec<f64> = frontier.points.iter().map(|p| p.risk).collect();
    let ror: Vec<f64> = frontier.points.iter().map(|p| p.ror).collect();
    let mut weights = Vec::with_capacity(n * k);
    for p in &frontier.points {
        weights.extend_from_slice(&p.weights);
    }
    Ok(vec![
        Value::Matrix(Matrix::new(n, 1, risk)?),
        Value::Matrix(Matrix::new(n, 1, ror)?),
        Value::Matrix(Matrix::new(n, k, weights)?),
    ])
}

fn expect_matrix(v: Value) -> Result<Matrix> {
    match v {
        Value::Matrix(m) => Ok(m),
        Value::Strings(_) => Err(Error::TypeDim("expected a matrix, got strings".into())),
    }
}

fn as_matrix<'a>(name: &str, v: &'a Value) -> Result<&'a Matrix> {
    match v {
        Value::Matrix(m) => Ok(m),
        Value::Strings(_) => Err(Error::TypeDim(format!(
            "'{name}' expects a matrix argument, got strings"
        ))),
    }
}

fn one_matrix(name: &str, values: &[Value]) -> Result<Matrix> {
    if values.len() != 1 {
        return Err(Error::Eval(format!(
            "'{name}' expects 1 argument, got {}",
            values.len()
        )));
    }
    Ok(as_matrix(name, &values[0])?.clone())
}

fn matrix_args<const N: usize>(name: &str, values: &[Value]) -> Result<[Matrix; N]> {
    if values.len() != N {
        return Err(Error::Eval(format!(
            "'{name}' expects {N} arguments, got {}",
            values.len()
        )));
    }
    let collected: Vec<Matrix> = values
        .iter()
        .map(|v| as_matrix(name, v).cloned())
        .collect::<Result<_>>()?;
    Ok(collected.try_into().expect("length checked"))
}

fn scalar_arg(name: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Matrix(m) => m.as_scalar().ok_or_else(|| {
            Error::TypeDim(format!(
                "'{name}' expects a scalar, got {}x{} matrix",
                m.rows(),
                m.cols()
            ))
        }),
        Value::Strings(_) => Err(Error::TypeDim(format!(
            "'{name}' expects a scalar, got strings"
        ))),
    }
}
