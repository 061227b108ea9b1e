//! Parser for the kernel command language.
//!
//! The grammar covers exactly the statement forms the bridge has to
//! evaluate: assignment, multi-output assignment, calls, `(:,k)` / `(k,:)`
//! slicing, `{k}` string-list indexing, `;` sequencing, and the plot
//! directives `grid on` / `xlabel(..)` / `ylabel(..)`. No control flow,
//! no operators.

use crate::error::{Error, Result};
use crate::value::format_f64;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Ident(String),
    Number(f64),
    Str(String),
    Call { name: String, args: Vec<Expr> },
    /// `base(:,k)` — one column of a matrix expression.
    ColIndex { base: Box<Expr>, col: usize },
    /// `base(k,:)` — one row of a matrix expression.
    RowIndex { base: Box<Expr>, row: usize },
    /// `name{k}` — element k of a string list.
    CellIndex { base: Box<Expr>, index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotDirective {
    GridOn,
    XLabel(Expr),
    YLabel(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Assign { target: String, expr: Expr },
    MultiAssign { targets: Vec<String>, call: Expr },
    Expr(Expr),
    Plot(PlotDirective),
}

/// A command string: one or more `;`-separated statements.
pub type Command = Vec<Statement>;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Semi,
    Eq,
    Minus,
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>> {
    let mut tokens = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '(' => push(&mut tokens, Token::LParen, start, &mut i),
            ')' => push(&mut tokens, Token::RParen, start, &mut i),
            '{' => push(&mut tokens, Token::LBrace, start, &mut i),
            '}' => push(&mut tokens, Token::RBrace, start, &mut i),
            '[' => push(&mut tokens, Token::LBracket, start, &mut i),
            ']' => push(&mut tokens, Token::RBracket, start, &mut i),
            ',' => push(&mut tokens, Token::Comma, start, &mut i),
            ':' => push(&mut tokens, Token::Colon, start, &mut i),
            ';' => push(&mut tokens, Token::Semi, start, &mut i),
            '=' => push(&mut tokens, Token::Eq, start, &mut i),
            '-' => push(&mut tokens, Token::Minus, start, &mut i),
            '\'' | '"' => {
                let quote = c;
                let mut j = i + 1;
                while j < bytes.len() && bytes[j] as char != quote {
                    j += 1;
                }
                if j >= bytes.len() {
                    return Err(Error::Parse(format!(
                        "unterminated string starting at position {start}"
                    )));
                }
                tokens.push((Token::Str(text[i + 1..j].to_string()), start));
                i = j + 1;
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < bytes.len() {
                    let d = bytes[j] as char;
                    if d.is_ascii_digit() || d == '.' {
                        j += 1;
                    } else if (d == 'e' || d == 'E')
                        && j + 1 < bytes.len()
                        && (bytes[j + 1].is_ascii_digit()
                            || bytes[j + 1] == b'+'
                            || bytes[j + 1] == b'-')
                    {
                        j += 2;
                    } else {
                        break;
                    }
                }
                let v: f64 = text[i..j]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number '{}' at position {i}", &text[i..j])))?;
                tokens.push((Token::Number(v), start));
                i = j;
            }
            _ if c.is_ascii_alphabetic() => {
                let mut j = i;
                while j < bytes.len()
                    && ((bytes[j] as char).is_ascii_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                tokens.push((Token::Ident(text[i..j].to_string()), start));
                i = j;
            }
            _ => {
                return Err(Error::Parse(format!(
                    "unexpected character '{c}' at position {i}"
                )))
            }
        }
    }
    Ok(tokens)
}

fn push(tokens: &mut Vec<(Token, usize)>, tok: Token, start: usize, i: &mut usize) {
    tokens.push((tok, start));
    *i += 1;
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&Token> {
        self.tokens.get(self.pos + 1).map(|(t, _)| t)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn position(&self) -> usize {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|(_, p)| *p)
            .unwrap_or(0)
    }

    fn expect(&mut self, tok: Token, what: &str) -> Result<()> {
        let pos = self.position();
        match self.next() {
            Some(t) if t == tok => Ok(()),
            other => Err(Error::Parse(format!(
                "expected {what} at position {pos}, got {other:?}"
            ))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        let pos = self.position();
        match self.next() {
            Some(Token::Ident(name)) => Ok(name),
            other => Err(Error::Parse(format!(
                "expected {what} at position {pos}, got {other:?}"
            ))),
        }
    }

    fn index(&mut self, what: &str) -> Result<usize> {
        let pos = self.position();
        match self.next() {
            Some(Token::Number(v)) if v >= 1.0 && v.fract() == 0.0 => Ok(v as usize),
            other => Err(Error::Parse(format!(
                "expected positive integer {what} at position {pos}, got {other:?}"
            ))),
        }
    }

    fn statement(&mut self) -> Result<Statement> {
        match (self.peek(), self.peek2()) {
            (Some(Token::LBracket), _) => {
                self.next();
                let mut targets = vec![self.ident("output name")?];
                while self.peek() == Some(&Token::Comma) {
                    self.next();
                    targets.push(self.ident("output name")?);
                }
                self.expect(Token::RBracket, "']'")?;
                self.expect(Token::Eq, "'='")?;
                let call = self.expr()?;
                if !matches!(call, Expr::Call { .. }) {
                    return Err(Error::Parse(
                        "multi-output assignment requires a function call".into(),
                    ));
                }
                Ok(Statement::MultiAssign { targets, call })
            }
            (Some(Token::Ident(name)), Some(Token::Eq)) => {
                let target = name.clone();
                self.next();
                self.next();
                let expr = self.expr()?;
                Ok(Statement::Assign { target, expr })
            }
            (Some(Token::Ident(name)), next) if name == "grid" => {
                if let Some(Token::Ident(on)) = next {
                    if on == "on" {
                        self.next();
                        self.next();
                        return Ok(Statement::Plot(PlotDirective::GridOn));
                    }
                }
                Err(Error::Parse(format!(
                    "expected 'grid on' at position {}",
                    self.position()
                )))
            }
            _ => {
                let expr = self.expr()?;
                Ok(match expr {
                    Expr::Call { ref name, ref args } if name == "xlabel" && args.len() == 1 => {
                        Statement::Plot(PlotDirective::XLabel(args[0].clone()))
                    }
                    Expr::Call { ref name, ref args } if name == "ylabel" && args.len() == 1 => {
                        Statement::Plot(PlotDirective::YLabel(args[0].clone()))
                    }
                    other => Statement::Expr(other),
                })
            }
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let pos = self.position();
        let mut base = match self.next() {
            Some(Token::Ident(name)) => Expr::Ident(name),
            Some(Token::Number(v)) => Expr::Number(v),
            Some(Token::Minus) => match self.next() {
                Some(Token::Number(v)) => Expr::Number(-v),
                other => {
                    return Err(Error::Parse(format!(
                        "expected number after '-' at position {pos}, got {other:?}"
                    )))
                }
            },
            Some(Token::Str(s)) => Expr::Str(s),
            other => {
                return Err(Error::Parse(format!(
                    "expected expression at position {pos}, got {other:?}"
                )))
            }
        };
        loop {
            match self.peek() {
                Some(Token::LParen) => {
                    self.next();
                    base = self.paren_suffix(base)?;
                }
                Some(Token::LBrace) => {
                    self.next();
                    let index = self.index("string-list index")?;
                    self.expect(Token::RBrace, "'}'")?;
                    base = Expr::CellIndex {
                        base: Box::new(base),
                        index,
                    };
                }
                _ => break,
            }
        }
        Ok(base)
    }

    /// After '(': either slicing `(:,k)` / `(k,:)` or a call argument list.
    fn paren_suffix(&mut self, base: Expr) -> Result<Expr> {
        if self.peek() == Some(&Token::Colon) {
            self.next();
            self.expect(Token::Comma, "','")?;
            let col = self.index("column index")?;
            self.expect(Token::RParen, "')'")?;
            return Ok(Expr::ColIndex {
                base: Box::new(base),
                col,
            });
        }
        if matches!(self.peek(), Some(Token::Number(_))) && self.peek2() == Some(&Token::Comma) {
            if let Some(Token::Colon) = self.tokens.get(self.pos + 2).map(|(t, _)| t) {
                let row = self.index("row index")?;
                self.next();
                self.next();
                self.expect(Token::RParen, "')'")?;
                return Ok(Expr::RowIndex {
                    base: Box::new(base),
                    row,
                });
            }
        }
        let name = match base {
            Expr::Ident(name) => name,
            other => {
                return Err(Error::Parse(format!(
                    "cannot call non-identifier expression {other:?}"
                )))
            }
        };
        let mut args = Vec::new();
        if self.peek() != Some(&Token::RParen) {
            args.push(self.expr()?);
            while self.peek() == Some(&Token::Comma) {
                self.next();
                args.push(self.expr()?);
            }
        }
        self.expect(Token::RParen, "')'")?;
        Ok(Expr::Call { name, args })
    }
}

/// Parse a command string into a statement sequence.
pub fn parse_command(text: &str) -> Result<Command> {
    if text.trim().is_empty() {
        return Err(Error::Parse("empty command".into()));
    }
    let mut parser = Parser {
        tokens: lex(text)?,
        pos: 0,
    };
    let mut statements = Vec::new();
    loop {
        statements.push(parser.statement()?);
        match parser.peek() {
            Some(Token::Semi) => {
                parser.next();
                // tolerate a trailing ';'
                if parser.peek().is_none() {
                    break;
                }
            }
            None => break,
            Some(_) => {
                return Err(Error::Parse(format!(
                    "unexpected trailing input at position {}",
                    parser.position()
                )))
            }
        }
    }
    Ok(statements)
}

/// Workspace identifiers a command reads, in first-appearance order.
/// Callee names and assignment targets are not reads.
pub fn collect_idents(cmd: &Command) -> Vec<String> {
    let mut out = Vec::new();
    for st in cmd {
        match st {
            Statement::Assign { expr, .. } => collect_expr_idents(expr, &mut out),
            Statement::MultiAssign { call, .. } => collect_expr_idents(call, &mut out),
            Statement::Expr(expr) => collect_expr_idents(expr, &mut out),
            Statement::Plot(PlotDirective::GridOn) => {}
            Statement::Plot(PlotDirective::XLabel(e))
            | Statement::Plot(PlotDirective::YLabel(e)) => collect_expr_idents(e, &mut out),
        }
    }
    out
}

fn collect_expr_idents(expr: &Expr, out: &mut Vec<String>) {
    match expr {
        Expr::Ident(name) => {
            if !out.iter().any(|n| n == name) {
                out.push(name.clone());
            }
        }
        Expr::Number(_) | Expr::Str(_) => {}
        Expr::Call { args, .. } => {
            for a in args {
                collect_expr_idents(a, out);
            }
        }
        Expr::ColIndex { base, .. } | Expr::RowIndex { base, .. } | Expr::CellIndex { base, .. } => {
            collect_expr_idents(base, out)
        }
    }
}

/// Canonical text form; `parse_command(pretty_print(cmd)) == cmd`.
pub fn pretty_print(cmd: &Command) -> String {
    cmd.iter()
        .map(print_statement)
        .collect::<Vec<_>>()
        .join("; ")
}

fn print_statement(st: &Statement) -> String {
    match st {
        Statement::Assign { target, expr } => format!("{target}={}", print_expr(expr)),
        Statement::MultiAssign { targets, call } => {
            format!("[{}] = {}", targets.join(", "), print_expr(call))
        }
        Statement::Expr(expr) => print_expr(expr),
        Statement::Plot(PlotDirective::GridOn) => "grid on".to_string(),
        Statement::Plot(PlotDirective::XLabel(e)) => format!("xlabel({})", print_expr(e)),
        Statement::Plot(PlotDirective::YLabel(e)) => format!("ylabel({})", print_expr(e)),
    }
}

fn print_expr(expr: &Expr) -> String {
    match expr {
        Expr::Ident(name) => name.clone(),
        Expr::Number(v) => format_f64(*v),
        Expr::Str(s) => format!("\"{s}\""),
        Expr::Call { name, args } => {
            let args: Vec<String> = args.iter().map(print_expr).collect();
            format!("{name}({})", args.join(", "))
        }
        Expr::ColIndex { base, col } => format!("{}(:,{col})", print_expr(base)),
        Expr::RowIndex { base, row } => format!("{}({row},:)", print_expr(base)),
        Expr::CellIndex { base, index } => format!("{}{{{index}}}", print_expr(base)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assign(text: &str) -> Statement {
        let cmd = parse_command(text).unwrap();
        assert_eq!(cmd.len(), 1);
        cmd.into_iter().next().unwrap()
    }

    #[test]
    fn parses_column_slice_assignment() {
        match assign("x=data(:,1)") {
            Statement::Assign { target, expr } => {
                assert_eq!(target, "x");
                assert_eq!(
                    expr,
                    Expr::ColIndex {
                        base: Box::new(Expr::Ident("data".into())),
                        col: 1
                    }
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_multi_assign() {
        match assign("[ret, cov] = ewstats(retseries)") {
            Statement::MultiAssign { targets, call } => {
                assert_eq!(targets, vec!["ret", "cov"]);
                assert_eq!(
                    call,
                    Expr::Call {
                        name: "ewstats".into(),
                        args: vec![Expr::Ident("retseries".into())]
                    }
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_call_assignment() {
        match assign("m=mean(x)") {
            Statement::Assign { target, expr } => {
                assert_eq!(target, "m");
                assert!(matches!(expr, Expr::Call { ref name, .. } if name == "mean"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_plot_sequence() {
        let cmd =
            parse_command("portopt(ret, cov, 20); grid on; xlabel(Labels{1}); ylabel(Labels{2})")
                .unwrap();
        assert_eq!(cmd.len(), 4);
        assert!(matches!(cmd[0], Statement::Expr(Expr::Call { ref name, .. }) if name == "portopt"));
        assert_eq!(cmd[1], Statement::Plot(PlotDirective::GridOn));
        assert!(matches!(cmd[2], Statement::Plot(PlotDirective::XLabel(_))));
        assert!(matches!(cmd[3], Statement::Plot(PlotDirective::YLabel(_))));
    }

    #[test]
    fn parse_errors_carry_position() {
        assert!(parse_command("").is_err());
        assert!(parse_command("x=\"oops").is_err());
        assert!(parse_command("x=data(:,0)").is_err());
        assert!(parse_command("x=data(:,)").is_err());
        assert!(parse_command("[x, y]").is_err());
        assert!(parse_command("x=1 2").is_err());
    }

    #[test]
    fn row_slice_and_negative_numbers() {
        match assign("y=data(2,:)") {
            Statement::Assign { expr, .. } => assert_eq!(
                expr,
                Expr::RowIndex {
                    base: Box::new(Expr::Ident("data".into())),
                    row: 2
                }
            ),
            other => panic!("unexpected {other:?}"),
        }
        match assign("z=blackscholes(100, 100, 0.05, 0.2, -1)") {
            Statement::Assign { expr, .. } => match expr {
                Expr::Call { args, .. } => assert_eq!(args[4], Expr::Number(-1.0)),
                other => panic!("unexpected {other:?}"),
            },
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pretty_print_round_trips_sample_commands() {
        for text in [
            "x=data(:,1)",
            "m=mean(x)",
            "[ret, cov] = ewstats(retseries)",
            "[risk, ror, weights] = portopt(ret, cov, 20)",
            "portopt(ret, cov, 20); grid on; xlabel(Labels{1}); ylabel(Labels{2})",
        ] {
            let ast = parse_command(text).unwrap();
            assert_eq!(parse_command(&pretty_print(&ast)).unwrap(), ast, "{text}");
        }
    }
}
