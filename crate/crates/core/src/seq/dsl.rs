//! Text form of a pulse sequence.
//!
//! ```text
//! seq   := term+
//! term  := delay | pulse | group
//! group := INT "x" "[" seq "]"
//! delay := "d" FLOAT            (us)
//! pulse := "X" | "Y" | "-X" | "-Y" | "P" FLOAT   (degrees)
//! ```
//!
//! Whitespace separates tokens but is optional where unambiguous, so `d5`,
//! `d 5`, `2x[` and `2 x [` are all accepted.

use super::{PulseSequence, SequenceElement, PHASE_MINUS_X, PHASE_MINUS_Y, PHASE_X, PHASE_Y};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64, String),
    Times,
    Open,
    Close,
    Delay,
    X,
    Y,
    MinusX,
    MinusY,
    Phase,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let (line_no, col) = (li + 1, i + 1);
            let push = |out: &mut Vec<Spanned>, tok| {
                out.push(Spanned {
                    tok,
                    line: line_no,
                    column: col,
                })
            };
            match c {
                '#' => break,
                c if c.is_whitespace() => i += 1,
                'x' => {
                    push(&mut out, Tok::Times);
                    i += 1;
                }
                '[' => {
                    push(&mut out, Tok::Open);
                    i += 1;
                }
                ']' => {
                    push(&mut out, Tok::Close);
                    i += 1;
                }
                'd' => {
                    push(&mut out, Tok::Delay);
                    i += 1;
                }
                'P' => {
                    push(&mut out, Tok::Phase);
                    i += 1;
                }
                'X' => {
                    push(&mut out, Tok::X);
                    i += 1;
                }
                'Y' => {
                    push(&mut out, Tok::Y);
                    i += 1;
                }
                '-' if matches!(chars.get(i + 1), Some('X')) => {
                    push(&mut out, Tok::MinusX);
                    i += 2;
                }
                '-' if matches!(chars.get(i + 1), Some('Y')) => {
                    push(&mut out, Tok::MinusY);
                    i += 2;
                }
                c if c == '-' || c == '+' || c == '.' || c.is_ascii_digit() => {
                    let start = i;
                    i += 1;
                    while i < chars.len() {
                        let c = chars[i];
                        let prev = chars[i - 1];
                        let exp_sign = (c == '-' || c == '+') && (prev == 'e' || prev == 'E');
                        if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                            i += 1;
                        } else {
                            break;
                        }
                    }
                    let s: String = chars[start..i].iter().collect();
                    let v: f64 = s
                        .parse()
                        .map_err(|_| syntax(line_no, col, format!("malformed number '{s}'")))?;
                    push(&mut out, Tok::Num(v, s));
                }
                other => return Err(syntax(line_no, col, format!("unexpected character '{other}'"))),
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map(|t| (t.line, t.column)).unwrap_or(self.end)
    }

    fn number(&mut self, what: &str) -> Result<(f64, usize, usize)> {
        let (line, column) = self.here();
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Num(v, _)) => {
                self.pos += 1;
                Ok((v, line, column))
            }
            _ => Err(syntax(line, column, format!("expected {what}"))),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        let (line, column) = self.here();
        if self.peek().map(|t| &t.tok) == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(syntax(line, column, format!("expected {what}")))
        }
    }

    /// Parses terms until end of input or a closing bracket.
    fn seq(&mut self, out: &mut Vec<SequenceElement>, nested: bool) -> Result<()> {
        let mut any = false;
        while let Some(t) = self.peek().cloned() {
            match t.tok {
                Tok::Close if nested => break,
                Tok::Close => return Err(syntax(t.line, t.column, "unmatched ']'")),
                Tok::Delay => {
                    self.pos += 1;
                    let (v, line, column) = self.number("delay duration after 'd'")?;
                    if v < 0.0 || !v.is_finite() {
                        return Err(Error::invalid(format!(
                            "negative delay {v} at line {line}, column {column}"
                        )));
                    }
                    out.push(SequenceElement::Delay(v));
                }
                Tok::X | Tok::Y | Tok::MinusX | Tok::MinusY => {
                    self.pos += 1;
                    let phase = match t.tok {
                        Tok::X => PHASE_X,
                        Tok::Y => PHASE_Y,
                        Tok::MinusX => PHASE_MINUS_X,
                        _ => PHASE_MINUS_Y,
                    };
                    out.push(SequenceElement::pulse(phase));
                }
                Tok::Phase => {
                    self.pos += 1;
                    let (deg, line, column) = self.number("phase in degrees after 'P'")?;
                    if !deg.is_finite() {
                        return Err(syntax(line, column, "phase must be finite"));
                    }
                    out.push(SequenceElement::pulse(deg.to_radians()));
                }
                Tok::Num(v, ref raw) => {
                    self.pos += 1;
                    let count = raw
                        .parse::<usize>()
                        .ok()
                        .filter(|&n| n >= 1 && n as f64 == v)
                        .ok_or_else(|| {
                            syntax(
                                t.line,
                                t.column,
                                format!("repeat count '{raw}' must be a positive integer"),
                            )
                        })?;
                    self.expect(Tok::Times, "'x' after repeat count")?;
                    self.expect(Tok::Open, "'[' to open a group")?;
                    let mut body = Vec::new();
                    self.seq(&mut body, true)?;
                    self.expect(Tok::Close, "']' to close the group")?;
                    for _ in 0..count {
                        out.extend_from_slice(&body);
                    }
                }
                Tok::Times | Tok::Open => return Err(syntax(t.line, t.column, "expected a delay, pulse or group")),
            }
            any = true;
        }
        if !any {
            let (line, column) = self.here();
            return Err(syntax(line, column, "empty sequence"));
        }
        Ok(())
    }
}

pub fn parse_sequence(text: &str) -> Result<PulseSequence> {
    let toks = lex(text)?;
    let last_line = text.lines().count().max(1);
    let last_col = text.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
    let mut p = Parser {
        toks,
        pos: 0,
        end: (last_line, last_col),
    };
    let mut elements = Vec::new();
    p.seq(&mut elements, false)?;
    PulseSequence::new(elements, "dsl")
}

/// One token per element, groups flattened. Delays and phases use the
/// shortest decimal form that parses back to the same value.
pub fn format_sequence(s: &PulseSequence) -> String {
    s.elements()
        .iter()
        .map(|e| match *e {
            SequenceElement::Delay(d) => format!("d{d}"),
            SequenceElement::Pulse { phase } => {
                if phase == PHASE_X {
                    "X".into()
                } else if phase == PHASE_Y {
                    "Y".into()
                } else if phase == PHASE_MINUS_X {
                    "-X".into()
                } else if phase == PHASE_MINUS_Y {
                    "-Y".into()
                } else {
                    format!("P{}", degrees_for(phase))
                }
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Degree value whose conversion back to radians reproduces `phase` exactly,
/// searching a few ulps around the direct conversion.
fn degrees_for(phase: f64) -> f64 {
    let deg = phase.to_degrees();
    let mut candidates = vec![deg];
    let (mut up, mut down) = (deg, deg);
    for _ in 0..8 {
        up = up.next_up();
        down = down.next_down();
        candidates.push(up);
        candidates.push(down);
    }
    candidates
        .into_iter()
        .filter(|c| super::normalize_phase(c.to_radians()) == phase)
        .min_by_key(|c| format!("{c}").len())
        .unwrap_or(deg)
}
