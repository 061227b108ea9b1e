//! End-to-end runner: load a workbook CSV, execute a script of bridge
//! calls, write the result workbook, the audit trail, and optionally the
//! frontier plot outputs.
//!
//! Script files hold one bridge call per line, textually identical to the
//! worksheet formulas (`MLPutMatrix("retseries", B4:D9)`), so published
//! call sequences transcribe directly into runnable fixtures. `#` lines
//! are comments; blank lines are ignored; function names are
//! case-insensitive. Range arguments may be quoted or bare (straight or
//! typographic quotes), tolerating the mismatched quoting that appears in
//! print.

use std::fs;
use std::path::{Path, PathBuf};

use crate::bridge::{PlotArtifact, Session, SessionConfig, StatusResult};
use crate::error::{Error, Result};
use crate::value::format_f64;
use crate::workbook::Workbook;

/// One parsed script line.
#[derive(Debug, Clone, PartialEq)]
pub enum ScriptStatement {
    PutMatrix { name: String, reference: String },
    AppendMatrix { name: String, reference: String },
    DeleteMatrix { name: String },
    EvalString { command: String },
    GetMatrix { name: String, anchor: String },
    Fcn { function: String, reference: String },
    Sub { function: String, out: String, reference: String },
    Close,
    Open,
    ShowErrors { full: bool },
    StartDir { path: String },
    UseFullDesktop { flag: bool },
    AutoStart { flag: bool },
}

/// Parse a single script line (comments and blank lines already removed).
pub fn parse_statement(line: &str) -> Result<ScriptStatement> {
    let line = line.trim();
    let open = line
        .find('(')
        .ok_or_else(|| Error::Parse(format!("expected a bridge call, got '{line}'")))?;
    if !line.ends_with(')') {
        return Err(Error::Parse(format!("missing closing ')' in '{line}'")));
    }
    let name = line[..open].trim().to_ascii_lowercase();
    let args = split_args(&line[open + 1..line.len() - 1]);
    let want = |n: usize| -> Result<()> {
        if args.len() == n {
            Ok(())
        } else {
            Err(Error::Parse(format!(
                "'{name}' expects {n} argument(s), got {} in '{line}'",
                args.len()
            )))
        }
    };
    match name.as_str() {
        "mlputmatrix" => {
            want(2)?;
            Ok(ScriptStatement::PutMatrix {
                name: args[0].clone(),
                reference: args[1].clone(),
            })
        }
        "mlappendmatrix" => {
            want(2)?;
            Ok(ScriptStatement::AppendMatrix {
                name: args[0].clone(),
                reference: args[1].clone(),
            })
        }
        "mldeletematrix" => {
            want(1)?;
            Ok(ScriptStatement::DeleteMatrix {
                name: args[0].clone(),
            })
        }
        "mlevalstring" => {
            want(1)?;
            Ok(ScriptStatement::EvalString {
                command: args[0].clone(),
            })
        }
        "mlgetmatrix" => {
            want(2)?;
            Ok(ScriptStatement::GetMatrix {
                name: args[0].clone(),
                anchor: args[1].clone(),
            })
        }
        "matlabfcn" => {
            want(2)?;
            Ok(ScriptStatement::Fcn {
                function: args[0].clone(),
                reference: args[1].clone(),
            })
        }
        "matlabsub" => {
            want(3)?;
            Ok(ScriptStatement::Sub {
                function: args[0].clone(),
                out: args[1].clone(),
                reference: args[2].clone(),
            })
        }
        "mlclose" => {
            want(0)?;
            Ok(ScriptStatement::Close)
        }
        "mlopen" => {
            want(0)?;
            Ok(ScriptStatement::Open)
        }
        "mlshowmatlaberrors" => {
            want(1)?;
            Ok(ScriptStatement::ShowErrors {
                full: parse_flag(&args[0])?,
            })
        }
        "mlstartdir" => {
            want(1)?;
            Ok(ScriptStatement::StartDir {
                path: args[0].clone(),
            })
        }
        "mlusefulldesktop" => {
            want(1)?;
            Ok(ScriptStatement::UseFullDesktop {
                flag: parse_flag(&args[0])?,
            })
        }
        "mlautostart" => {
            want(1)?;
            Ok(ScriptStatement::AutoStart {
                flag: parse_flag(&args[0])?,
            })
        }
        other => Err(Error::Parse(format!("unknown bridge function '{other}'"))),
    }
}

fn parse_flag(text: &str) -> Result<bool> {
    match text.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => Err(Error::Parse(format!("expected a boolean flag, got '{other}'"))),
    }
}

const QUOTES: [char; 4] = ['"', '\'', '\u{201c}', '\u{201d}'];

/// Split an argument list on top-level commas, respecting quotes, then
/// strip surrounding (possibly mismatched) quote characters.
fn split_args(text: &str) -> Vec<String> {
    let mut args = Vec::new();
    let mut current = String::new();
    let mut in_quote: Option<char> = None;
    for c in text.chars() {
        match in_quote {
            Some(q) => {
                current.push(c);
                // typographic open/close quotes pair with each other
                let closes = c == q || (q == '\u{201c}' && c == '\u{201d}');
                if closes {
                    in_quote = None;
                }
            }
            None => {
                if QUOTES.contains(&c) {
                    in_quote = Some(c);
                    current.push(c);
                } else if c == ',' {
                    args.push(current.clone());
                    current.clear();
                } else {
                    current.push(c);
                }
            }
        }
    }
    if !current.trim().is_empty() || !args.is_empty() {
        args.push(current);
    }
    args.iter()
        .map(|a| {
            a.trim()
                .trim_matches(|c| QUOTES.contains(&c))
                .to_string()
        })
        .filter(|a| !a.is_empty())
        .collect()
}

fn execute(session: &mut Session, st: &ScriptStatement) -> StatusResult {
    match st {
        ScriptStatement::PutMatrix { name, reference } => session.ml_put_matrix(name, reference),
        ScriptStatement::AppendMatrix { name, reference } => {
            session.ml_append_matrix(name, reference)
        }
        ScriptStatement::DeleteMatrix { name } => session.ml_delete_matrix(name),
        ScriptStatement::EvalString { command } => session.ml_eval_string(command),
        ScriptStatement::GetMatrix { name, anchor } => session.ml_get_matrix(name, anchor),
        ScriptStatement::Fcn { function, reference } => {
            match session.matlabfcn(function, reference) {
                Ok(_) => StatusResult::ok(),
                Err(e) => StatusResult {
                    code: e.status_code(),
                    detail: None,
                },
            }
        }
        ScriptStatement::Sub {
            function,
            out,
            reference,
        } => session.matlabsub(function, out, reference),
        ScriptStatement::Close => session.ml_close(),
        ScriptStatement::Open => session.ml_open(),
        ScriptStatement::ShowErrors { full } => session.ml_show_matlab_errors(*full),
        ScriptStatement::StartDir { path } => session.ml_start_dir(path),
        ScriptStatement::UseFullDesktop { flag } => session.ml_use_full_desktop(*flag),
        ScriptStatement::AutoStart { flag } => session.ml_auto_start(*flag),
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workbook: PathBuf,
    pub script: PathBuf,
    pub out: PathBuf,
    pub audit: PathBuf,
    pub plot: Option<PathBuf>,
    pub keep_going: bool,
    pub full_errors: bool,
    pub start_dir: Option<PathBuf>,
}

/// Execute a script against a workbook through a fresh session. Writes
/// the final workbook, the audit log (flushed even when a statement
/// fails), and the frontier plot outputs when requested. Exit code 0 iff
/// every statement returned status 0; otherwise the first failing
/// statement's code.
pub fn run(opts: &RunOptions) -> i32 {
    match run_inner(opts) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.status_code()
        }
    }
}

fn run_inner(opts: &RunOptions) -> Result<i32> {
    let workbook = Workbook::load_csv(&opts.workbook)?;
    let script = fs::read_to_string(&opts.script)?;
    let config = SessionConfig {
        auto_start: true,
        start_dir: opts.start_dir.clone(),
        use_full_desktop: false,
    };
    let mut session = Session::init(config, workbook);
    if opts.full_errors {
        session.ml_show_matlab_errors(true);
    }

    let mut exit = 0;
    for line in script.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let status = match parse_statement(trimmed) {
            Ok(st) => execute(&mut session, &st),
            Err(err) => session.audit_script_failure(trimmed, &err),
        };
        if !status.is_ok() {
            if let Some(detail) = &status.detail {
                eprintln!("{trimmed}: {detail}");
            }
            if exit == 0 {
                exit = status.code;
            }
            if !opts.keep_going {
                break;
            }
        }
    }

    session.workbook().save_csv(&opts.out)?;
    session.audit().export_jsonl(&opts.audit)?;

    if let Some(base) = &opts.plot {
        if let Some(artifact) = session.plot_artifact() {
            let base = match (&session.config().start_dir, base.is_relative()) {
                (Some(dir), true) => dir.join(base),
                _ => base.clone(),
            };
            emit_frontier_plot(artifact, &base)?;
        }
    }
    Ok(exit)
}

/// Write `<base>.csv` (risk, ror, one column per weight) and `<base>.svg`
/// (risk/ror polyline with axis labels and optional grid).
pub fn emit_frontier_plot(artifact: &PlotArtifact, base: &Path) -> Result<()> {
    let points = &artifact.frontier.points;
    if points.len() < 2 {
        return Err(Error::Eval(format!(
            "frontier plot needs at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(dir) = base.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }

    let k = artifact.frontier.mu.len();
    let mut csv = String::from("risk,ror");
    for i in 1..=k {
        csv.push_str(&format!(",w{i}"));
    }
    csv.push('\n');
    for p in points {
        csv.push_str(&format_f64(p.risk));
        csv.push(',');
        csv.push_str(&format_f64(p.ror));
        for w in &p.weights {
            csv.push(',');
            csv.push_str(&format_f64(*w));
        }
        csv.push('\n');
    }
    fs::write(with_extension(base, "csv"), csv)?;
    fs::write(with_extension(base, "svg"), render_svg(artifact))?;
    Ok(())
}

fn with_extension(base: &Path, ext: &str) -> PathBuf {
    let mut name = base.as_os_str().to_os_string();
    name.push(".");
    name.push(ext);
    PathBuf::from(name)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;

fn render_svg(artifact: &PlotArtifact) -> String {
    let points = &artifact.frontier.points;
    let (x_min, x_max) = padded_span(points.iter().map(|p| p.risk));
    let (y_min, y_max) = padded_span(points.iter().map(|p| p.ror));
    let to_x = |v: f64| {
        MARGIN_LEFT + (v - x_min) / (x_max - x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    };
    let to_y = |v: f64| {
        HEIGHT - MARGIN_BOTTOM - (v - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    };

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));

    let ticks = 5;
    for i in 0..=ticks {
        let f = i as f64 / ticks as f64;
        let xv = x_min + f * (x_max - x_min);
        let yv = y_min + f * (y_max - y_min);
        let x = to_x(xv);
        let y = to_y(yv);
        if artifact.grid {
            svg.push_str(&format!(
                "  <line class=\"grid\" x1=\"{x:.2}\" y1=\"{MARGIN_TOP}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
                 stroke=\"#cccccc\" stroke-width=\"1\"/>\n",
                HEIGHT - MARGIN_BOTTOM
            ));
            svg.push_str(&format!(
                "  <line class=\"grid\" x1=\"{MARGIN_LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
                 stroke=\"#cccccc\" stroke-width=\"1\"/>\n",
                WIDTH - MARGIN_RIGHT
            ));
        }
        svg.push_str(&format!(
            "  <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            HEIGHT - MARGIN_BOTTOM + 18.0,
            format_tick(xv)
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{y:.2}\" text-anchor=\"end\" dominant-baseline=\"middle\">{}</text>\n",
            MARGIN_LEFT - 6.0,
            format_tick(yv)
        ));
    }

    // axes
    svg.push_str(&format!(
        "  <line x1=\"{MARGIN_LEFT}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_BOTTOM,
        WIDTH - MARGIN_RIGHT,
        HEIGHT - MARGIN_BOTTOM
    ));
    svg.push_str(&format!(
        "  <line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_BOTTOM
    ));

    let pts: Vec<String> = points
        .iter()
        .map(|p| format!("{:.2},{:.2}", to_x(p.risk), to_y(p.ror)))
        .collect();
    svg.push_str(&format!(
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"2\"/>\n",
        pts.join(" ")
    ));

    if let Some(label) = &artifact.xlabel {
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
            HEIGHT - 10.0,
            xml_escape(label)
        ));
    }
    if let Some(label) = &artifact.ylabel {
        let cy = (MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0;
        svg.push_str(&format!(
            "  <text x=\"16\" y=\"{cy:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {cy:.2})\">{}</text>\n",
            xml_escape(label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Data span padded by 5% on each side; degenerate spans widen to a unit.
fn padded_span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        min = min.min(v);
        max = max.max(v);
    }
    let span = max - min;
    if span <= 0.0 {
        (min - 0.5, max + 0.5)
    } else {
        (min - 0.05 * span, max + 0.05 * span)
    }
}

fn format_tick(v: f64) -> String {
    format!("{v:.4}")
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
