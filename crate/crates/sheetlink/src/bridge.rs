//! The link protocol layer: a session state machine moving values
//! between the cell grid and the kernel workspace, with every call
//! audited.
//!
//! Operation names follow the link-management / data-management function
//! table one to one (`MLPutMatrix` -> `ml_put_matrix`, and so on).
//! Every call appends exactly one audit record, success or failure, and
//! failed operations never mutate the workspace or the workbook.

use std::path::PathBuf;

use crate::audit::{self, AuditLog};
use crate::error::{Error, Result};
use crate::kernel::{self, ResolvedDirective, Workspace};
use crate::optim::FrontierResult;
use crate::value::{Matrix, Value};
use crate::workbook::{parse_cell, RangeRef, Workbook};

/// How failures surface in `StatusResult`: bare codes, or codes plus the
/// kernel's diagnostic text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    StandardCodes,
    FullMessages,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Running,
    Closed,
}

#[derive(Debug, Clone, Default)]
pub struct SessionConfig {
    pub auto_start: bool,
    pub start_dir: Option<PathBuf>,
    pub use_full_desktop: bool,
}

/// Outcome of a bridge call: code 0 is success, matching the `0 <==`
/// renderings of the worksheet formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct StatusResult {
    pub code: i32,
    pub detail: Option<String>,
}

impl StatusResult {
    pub fn ok() -> StatusResult {
        StatusResult {
            code: 0,
            detail: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.code == 0
    }
}

/// Frontier data plus the plot annotations collected for it.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotArtifact {
    pub frontier: FrontierResult,
    pub xlabel: Option<String>,
    pub ylabel: Option<String>,
    pub grid: bool,
}

/// One bridge session: exclusive owner of a workspace, a workbook and an
/// audit sink. Calls are strictly serialized; the audit sequence defines
/// the execution order.
#[derive(Debug)]
pub struct Session {
    state: SessionState,
    workspace: Workspace,
    workbook: Workbook,
    error_mode: ErrorMode,
    config: SessionConfig,
    audit: AuditLog,
    plot: Option<PlotArtifact>,
    session_id: String,
}

impl Session {
    /// Initialize a running session over a workbook. The first audit
    /// record is the init event, carrying the initial workbook digest.
    pub fn init(config: SessionConfig, workbook: Workbook) -> Session {
        let session_id = audit::fresh_session_id();
        let mut session = Session {
            state: SessionState::Running,
            workspace: Workspace::new(),
            workbook,
            error_mode: ErrorMode::StandardCodes,
            config,
            audit: AuditLog::new(),
            plot: None,
            session_id,
        };
        let args = args_json(&[
            &session.config.auto_start.to_string(),
            &session
                .config
                .start_dir
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        ]);
        let digest = session.workbook.digest();
        session.audit.record(
            &session.session_id.clone(),
            "matlabinit",
            args,
            vec![],
            vec![],
            digest,
            0,
        );
        session
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn workbook(&self) -> &Workbook {
        &self.workbook
    }

    pub fn workbook_mut(&mut self) -> &mut Workbook {
        &mut self.workbook
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn plot_artifact(&self) -> Option<&PlotArtifact> {
        self.plot.as_ref()
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    fn require_running(&self) -> Result<()> {
        match self.state {
            SessionState::Running => Ok(()),
            SessionState::Closed => Err(Error::State("session is closed".into())),
        }
    }

    fn require_closed(&self) -> Result<()> {
        match self.state {
            SessionState::Closed => Ok(()),
            SessionState::Running => Err(Error::State("session is already running".into())),
        }
    }

    /// Record the outcome of one call and convert it to a status per the
    /// current error mode.
    fn finish(
        &mut self,
        op: &str,
        args: String,
        outcome: Result<(Vec<String>, Vec<String>, String)>,
    ) -> StatusResult {
        let (inputs, outputs, digest, status, detail) = match outcome {
            Ok((inputs, outputs, digest)) => (inputs, outputs, digest, 0, None),
            Err(err) => (
                vec![],
                vec![],
                String::new(),
                err.status_code(),
                match self.error_mode {
                    ErrorMode::StandardCodes => None,
                    ErrorMode::FullMessages => Some(err.to_string()),
                },
            ),
        };
        self.audit.record(
            &self.session_id.clone(),
            op,
            args,
            inputs,
            outputs,
            digest,
            status,
        );
        StatusResult {
            code: status,
            detail,
        }
    }

    /// Terminate the kernel side: the workspace is discarded, the
    /// workbook persists.
    pub fn ml_close(&mut self) -> StatusResult {
        let outcome = self.require_running().map(|()| {
            self.state = SessionState::Closed;
            self.workspace = Workspace::new();
            (vec![], vec![], String::new())
        });
        self.finish("MLClose", args_json(&[]), outcome)
    }

    /// Restart the kernel side with a fresh empty workspace.
    pub fn ml_open(&mut self) -> StatusResult {
        let outcome = self.require_closed().map(|()| {
            self.state = SessionState::Running;
            self.workspace = Workspace::new();
            (vec![], vec![], String::new())
        });
        self.finish("MLOpen", args_json(&[]), outcome)
    }

    /// Create or overwrite a workspace value with data from the grid.
    pub fn ml_put_matrix(&mut self, name: &str, ref_text: &str) -> StatusResult {
        let outcome = (|| {
            self.require_running()?;
            let range = self.workbook.resolve_ref(ref_text)?;
            let value = self.workbook.read_range(range)?;
            let digest = audit::value_digest(&value);
            self.workspace.bind(name, value)?;
            Ok((vec![ref_text.to_string()], vec![name.to_string()], digest))
        })();
        self.finish("MLPutMatrix", args_json(&[name, ref_text]), outcome)
    }

    /// Create or extend a workspace matrix with rows from the grid.
    pub fn ml_append_matrix(&mut self, name: &str, ref_text: &str) -> StatusResult {
        let outcome = (|| {
            self.require_running()?;
            let range = self.workbook.resolve_ref(ref_text)?;
            let incoming = self.workbook.read_range(range)?;
            let value = match self.workspace.get(name) {
                Err(_) => incoming,
                Ok(existing) => {
                    let (old, new) = match (existing, &incoming) {
                        (Value::Matrix(a), Value::Matrix(b)) => (a, b),
                        _ => {
                            return Err(Error::TypeDim(
                                "append requires matrices on both sides".into(),
                            ))
                        }
                    };
                    if old.cols() != new.cols() {
                        return Err(Error::TypeDim(format!(
                            "append width mismatch: existing {} columns, block {}",
                            old.cols(),
                            new.cols()
                        )));
                    }
                    let mut data = old.data().to_vec();
                    data.extend_from_slice(new.data());
                    Value::Matrix(Matrix::new(old.rows() + new.rows(), old.cols(), data)?)
                }
            };
            let digest = audit::value_digest(&value);
            self.workspace.bind(name, value)?;
            Ok((vec![ref_text.to_string()], vec![name.to_string()], digest))
        })();
        self.finish("MLAppendMatrix", args_json(&[name, ref_text]), outcome)
    }

    /// Remove a workspace binding.
    pub fn ml_delete_matrix(&mut self, name: &str) -> StatusResult {
        let outcome = (|| {
            self.require_running()?;
            self.workspace.unbind(name)?;
            Ok((vec![name.to_string()], vec![], String::new()))
        })();
        self.finish("MLDeleteMatrix", args_json(&[name]), outcome)
    }

    /// Parse and evaluate a command string against the session workspace.
    /// Evaluation is transactional: on error nothing is bound. Plot
    /// artifacts produced by a bare portopt call are captured for the
    /// host to retrieve.
    pub fn ml_eval_string(&mut self, command: &str) -> StatusResult {
        let outcome = (|| {
            self.require_running()?;
            let cmd = kernel::parse_command(command)?;
            let inputs = kernel::parse::collect_idents(&cmd);
            let (next, output) = kernel::eval_command(&self.workspace, &cmd)?;

            let mut digest_input = String::new();
            for name in &output.assigned {
                let value = next.get(name)?;
                digest_input.push_str(name);
                digest_input.push('=');
                digest_input.push_str(&value.canonical());
                digest_input.push('\n');
            }
            if let Some(frontier) = &output.plot {
                digest_input.push_str("plot=");
                for v in kernel::frontier_outputs(frontier)? {
                    digest_input.push_str(&v.canonical());
                    digest_input.push('\n');
                }
            }

            self.workspace = next;
            if let Some(frontier) = output.plot {
                self.plot = Some(PlotArtifact {
                    frontier,
                    xlabel: None,
                    ylabel: None,
                    grid: false,
                });
            }
            if let Some(artifact) = self.plot.as_mut() {
                for directive in &output.directives {
                    match directive {
                        ResolvedDirective::GridOn => artifact.grid = true,
                        ResolvedDirective::XLabel(s) => artifact.xlabel = Some(s.clone()),
                        ResolvedDirective::YLabel(s) => artifact.ylabel = Some(s.clone()),
                    }
                }
            }
            Ok((
                inputs,
                output.assigned,
                audit::sha256_hex(digest_input.as_bytes()),
            ))
        })();
        self.finish("MLEvalString", args_json(&[command]), outcome)
    }

    /// Write a workspace matrix into the grid at an anchor cell.
    pub fn ml_get_matrix(&mut self, name: &str, anchor_text: &str) -> StatusResult {
        let outcome = (|| {
            self.require_running()?;
            let anchor = parse_cell(anchor_text)?;
            let matrix = match self.workspace.get(name)? {
                Value::Matrix(m) => m.clone(),
                Value::Strings(_) => {
                    return Err(Error::TypeDim(format!(
                        "'{name}' is a string list; only matrices are written to the grid"
                    )))
                }
            };
            let digest = audit::value_digest(&Value::Matrix(matrix.clone()));
            let written = RangeRef::new(
                anchor,
                crate::workbook::CellRef {
                    col: anchor.col + matrix.cols() as u32 - 1,
                    row: anchor.row + matrix.rows() as u32 - 1,
                },
            );
            self.workbook.write_matrix(anchor, &matrix);
            Ok((vec![name.to_string()], vec![written.format()], digest))
        })();
        self.finish("MLGetMatrix", args_json(&[name, anchor_text]), outcome)
    }

    /// Read a workspace value directly, bypassing the grid.
    pub fn ml_get_var(&mut self, name: &str) -> Result<Value> {
        let result = (|| {
            self.require_running()?;
            Ok(self.workspace.get(name)?.clone())
        })();
        let outcome = match &result {
            Ok(value) => Ok((
                vec![name.to_string()],
                vec![],
                audit::value_digest(value),
            )),
            Err(e) => Err(clone_error(e)),
        };
        self.finish("MLGetVar", args_json(&[name]), outcome);
        result
    }

    /// Bind a host-program value directly, bypassing the grid. Only the
    /// programmatic API reaches this; script files have no syntax for it.
    pub fn ml_put_var(&mut self, name: &str, value: Value) -> StatusResult {
        let args = args_json(&[name, &value.canonical()]);
        let outcome = (|| {
            self.require_running()?;
            let digest = audit::value_digest(&value);
            self.workspace.bind(name, value)?;
            Ok((vec![], vec![name.to_string()], digest))
        })();
        self.finish("MLPutVar", args, outcome)
    }

    /// Apply a builtin to grid data and return the result without binding
    /// or writing anything.
    pub fn matlabfcn(&mut self, fn_name: &str, ref_text: &str) -> Result<Value> {
        let result = (|| {
            self.require_running()?;
            let range = self.workbook.resolve_ref(ref_text)?;
            let arg = self.workbook.read_range(range)?;
            kernel::apply_builtin(fn_name, &arg)
        })();
        let outcome = match &result {
            Ok(value) => Ok((
                vec![ref_text.to_string()],
                vec![],
                audit::value_digest(value),
            )),
            Err(e) => Err(clone_error(e)),
        };
        self.finish("matlabfcn", args_json(&[fn_name, ref_text]), outcome);
        result
    }

    /// Apply a builtin to grid data and write the result at an output
    /// anchor.
    pub fn matlabsub(&mut self, fn_name: &str, out_cell: &str, ref_text: &str) -> StatusResult {
        let outcome = (|| {
            self.require_running()?;
            let anchor = parse_cell(out_cell)?;
            let range = self.workbook.resolve_ref(ref_text)?;
            let arg = self.workbook.read_range(range)?;
            let result = kernel::apply_builtin(fn_name, &arg)?;
            let matrix = match &result {
                Value::Matrix(m) => m.clone(),
                Value::Strings(_) => {
                    return Err(Error::TypeDim(
                        "matlabsub result must be a matrix to write to the grid".into(),
                    ))
                }
            };
            let digest = audit::value_digest(&result);
            let written = RangeRef::new(
                anchor,
                crate::workbook::CellRef {
                    col: anchor.col + matrix.cols() as u32 - 1,
                    row: anchor.row + matrix.rows() as u32 - 1,
                },
            );
            self.workbook.write_matrix(anchor, &matrix);
            Ok((vec![ref_text.to_string()], vec![written.format()], digest))
        })();
        self.finish(
            "matlabsub",
            args_json(&[fn_name, out_cell, ref_text]),
            outcome,
        )
    }

    /// Toggle between bare status codes and full diagnostic messages.
    pub fn ml_show_matlab_errors(&mut self, full: bool) -> StatusResult {
        let outcome = self.require_running().map(|()| {
            self.error_mode = if full {
                ErrorMode::FullMessages
            } else {
                ErrorMode::StandardCodes
            };
            (vec![], vec![], String::new())
        });
        self.finish("MLShowMatlabErrors", args_json(&[&full.to_string()]), outcome)
    }

    /// Set the directory used to resolve relative plot-output paths.
    pub fn ml_start_dir(&mut self, path: &str) -> StatusResult {
        let outcome = self.require_running().map(|()| {
            self.config.start_dir = Some(PathBuf::from(path));
            (vec![], vec![], String::new())
        });
        self.finish("MLStartDir", args_json(&[path]), outcome)
    }

    /// Accepted and logged; no desktop exists here, so it has no
    /// behavioral effect.
    pub fn ml_use_full_desktop(&mut self, flag: bool) -> StatusResult {
        let outcome = self.require_running().map(|()| {
            self.config.use_full_desktop = flag;
            (vec![], vec![], String::new())
        });
        self.finish("MLUseFullDesktop", args_json(&[&flag.to_string()]), outcome)
    }

    /// Config flag consumed at host startup; logged for replay fidelity.
    pub fn ml_auto_start(&mut self, flag: bool) -> StatusResult {
        let outcome = self.require_running().map(|()| {
            self.config.auto_start = flag;
            (vec![], vec![], String::new())
        });
        self.finish("MLAutoStart", args_json(&[&flag.to_string()]), outcome)
    }

    /// Audit a script statement that failed to parse; the statement never
    /// reached a bridge operation but the failure itself is recorded.
    pub fn audit_script_failure(&mut self, statement: &str, err: &Error) -> StatusResult {
        let args = args_json(&[statement]);
        self.finish("script", args, Err(clone_error(err)))
    }
}

fn args_json(args: &[&str]) -> String {
    serde_json::to_string(args).expect("strings serialize")
}

fn clone_error(err: &Error) -> Error {
    let msg = err.to_string();
    match err.status_code() {
        1 => Error::State(msg),
        2 => Error::Parse(msg),
        4 => Error::TypeDim(msg),
        5 => Error::Reference(msg),
        6 => Error::Io(std::io::Error::other(msg)),
        _ => Error::Eval(msg),
    }
}
