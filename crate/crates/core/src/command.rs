//! The constrained command language the DM issues to the RN.
//!
//! ```text
//! command  := move | turn | stop | image
//! move     := MOVEVERB dir-lin number unit
//! turn     := TURNVERB dir-rot number ("degrees"|"deg")
//! stop     := "stop" | "halt"
//! image    := "send" ("image"|"picture"|"photo")
//! MOVEVERB := "move"|"go"|"drive"   TURNVERB := "turn"|"rotate"
//! dir-lin  := "forward"|"ahead"|"back"|"backward"|"backwards"
//! dir-rot  := "left"|"right"
//! unit     := "feet"|"foot"|"ft"|"meters"|"meter"|"m"
//! number   := decimal-numeral | number-word   (* one..twenty *)
//! ```
//!
//! Matching is case-insensitive and one command per message. Magnitudes are
//! held in thousandths (millimeters, millidegrees) so that the canonical
//! text form round-trips exactly.

use std::fmt;
use std::ops::Range;

use crate::sim::Motion;

pub const METERS_PER_FOOT: f64 = 0.3048;

const NUMBER_WORDS: [&str; 20] = [
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
    "twenty",
];

pub const MOVE_VERBS: [&str; 3] = ["move", "go", "drive"];
pub const TURN_VERBS: [&str; 2] = ["turn", "rotate"];

// 10 km / 10^7 degrees; keeps every value exactly representable through f64 text.
const MAX_THOUSANDTHS: u64 = 10_000_000;

/// A positive magnitude in thousandths of a unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Thousandths(u64);

impl Thousandths {
    pub fn new(thousandths: u64) -> Option<Self> {
        (1..=MAX_THOUSANDTHS)
            .contains(&thousandths)
            .then_some(Thousandths(thousandths))
    }

    /// Round a unit value to the nearest thousandth.
    pub fn from_units(value: f64) -> Option<Self> {
        if !value.is_finite() || value <= 0.0 {
            return None;
        }
        let scaled = (value * 1000.0).round();
        if !(1.0..=MAX_THOUSANDTHS as f64).contains(&scaled) {
            return None;
        }
        Some(Thousandths(scaled as u64))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl fmt::Display for Thousandths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / 1000;
        let frac = self.0 % 1000;
        if frac == 0 {
            write!(f, "{whole}")
        } else {
            let digits = format!("{frac:03}");
            write!(f, "{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinearDirection {
    Forward,
    Back,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TurnDirection {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    /// Distance in meters.
    Move {
        direction: LinearDirection,
        distance: Thousandths,
    },
    /// Angle in degrees, at most 360.
    Turn {
        direction: TurnDirection,
        angle: Thousandths,
    },
    Stop,
    SendImage,
}

pub const MAX_TURN: Thousandths = Thousandths(360_000);

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Move { direction, distance } => {
                let dir = match direction {
                    LinearDirection::Forward => "forward",
                    LinearDirection::Back => "back",
                };
                write!(f, "move {dir} {distance} m")
            }
            Command::Turn { direction, angle } => {
                let dir = match direction {
                    TurnDirection::Left => "left",
                    TurnDirection::Right => "right",
                };
                write!(f, "turn {dir} {angle} deg")
            }
            Command::Stop => f.write_str("stop"),
            Command::SendImage => f.write_str("send image"),
        }
    }
}

/// Canonical text form.
pub fn format(command: &Command) -> String {
    command.to_string()
}

/// What a command asks of the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Compiled {
    Motion(Motion),
    CaptureImage,
}

/// Map a command onto a sim primitive; counterclockwise is positive.
pub fn compile(command: &Command) -> Compiled {
    match *command {
        Command::Move { direction, distance } => {
            let d = distance.value();
            Compiled::Motion(Motion::Translate(match direction {
                LinearDirection::Forward => d,
                LinearDirection::Back => -d,
            }))
        }
        Command::Turn { direction, angle } => {
            let a = angle.value();
            Compiled::Motion(Motion::Rotate(match direction {
                TurnDirection::Left => a,
                TurnDirection::Right => -a,
            }))
        }
        Command::Stop => Compiled::Motion(Motion::Halt),
        Command::SendImage => Compiled::CaptureImage,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParseErrorCode {
    UnknownVerb,
    MissingDirection,
    MissingMagnitude,
    MissingUnit,
    BadNumber,
    TrailingInput,
}

impl ParseErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseErrorCode::UnknownVerb => "unknown_verb",
            ParseErrorCode::MissingDirection => "missing_direction",
            ParseErrorCode::MissingMagnitude => "missing_magnitude",
            ParseErrorCode::MissingUnit => "missing_unit",
            ParseErrorCode::BadNumber => "bad_number",
            ParseErrorCode::TrailingInput => "trailing_input",
        }
    }
}

impl fmt::Display for ParseErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parse failure. `span` is a character range within the input; an empty
/// span at the end means the input stopped early.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{code} at {}..{}: expected {expected}", span.start, span.end)]
pub struct ParseError {
    pub code: ParseErrorCode,
    pub span: Range<usize>,
    pub expected: String,
}

#[derive(Debug, Clone)]
struct Token {
    text: String,
    span: Range<usize>,
}

fn lex(input: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, String)> = None;
    let mut count = 0;
    for (i, ch) in input.chars().enumerate() {
        count = i + 1;
        if ch.is_whitespace() {
            if let Some((start, text)) = current.take() {
                tokens.push(Token { text, span: start..i });
            }
        } else {
            current
                .get_or_insert_with(|| (i, String::new()))
                .1
                .extend(ch.to_lowercase());
        }
    }
    if let Some((start, text)) = current {
        tokens.push(Token { text, span: start..count });
    }
    tokens
}

struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn error(&self, code: ParseErrorCode, token: Option<&Token>, expected: &str) -> ParseError {
        ParseError {
            code,
            span: token.map_or(self.len..self.len, |t| t.span.clone()),
            expected: expected.to_string(),
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(ParseError {
                code: ParseErrorCode::TrailingInput,
                span: t.span.start..self.len,
                expected: "end of command".into(),
            }),
        }
    }
}

fn looks_numeric(text: &str) -> bool {
    text.starts_with(|c: char| c.is_ascii_digit() || matches!(c, '.' | '-' | '+'))
}

/// A decimal numeral (`5`, `1.5`, `.5`) or a number word.
fn parse_number(text: &str) -> Option<f64> {
    if let Some(i) = NUMBER_WORDS.iter().position(|w| *w == text) {
        return Some((i + 1) as f64);
    }
    let (whole, frac) = match text.split_once('.') {
        Some((w, f)) => (w, Some(f)),
        None => (text, None),
    };
    let digits = |s: &str| s.chars().all(|c| c.is_ascii_digit());
    let valid = match frac {
        None => !whole.is_empty() && digits(whole),
        Some(f) => digits(whole) && digits(f) && !f.is_empty(),
    };
    if !valid {
        return None;
    }
    text.parse().ok()
}

pub fn parse(input: &str) -> Result<Command, ParseError> {
    let mut cur = Cursor {
        tokens: lex(input),
        pos: 0,
        len: input.chars().count(),
    };
    const VERBS: &str = "move | turn | stop | send image";
    let verb = match cur.bump() {
        Some(t) => t,
        None => return Err(cur.error(ParseErrorCode::UnknownVerb, None, VERBS)),
    };
    let command = match verb.text.as_str() {
        v if MOVE_VERBS.contains(&v) => {
            let direction = match cur.peek().map(|t| t.text.as_str()) {
                Some("forward" | "ahead") => LinearDirection::Forward,
                Some("back" | "backward" | "backwards") => LinearDirection::Back,
                _ => {
                    return Err(cur.error(ParseErrorCode::MissingDirection, cur.peek(), "forward | back"))
                }
            };
            cur.bump();
            let (value, number) = magnitude(&mut cur, "<number> feet | meters")?;
            let unit = cur.peek().map(|t| t.text.as_str());
            let meters = match unit {
                Some("feet" | "foot" | "ft") => value * METERS_PER_FOOT,
                Some("meters" | "meter" | "m") => value,
                _ => return Err(cur.error(ParseErrorCode::MissingUnit, cur.peek(), "feet | meters")),
            };
            cur.bump();
            let distance = Thousandths::from_units(meters).ok_or_else(|| ParseError {
                code: ParseErrorCode::BadNumber,
                span: number.span.clone(),
                expected: "a distance between 1 mm and 10 km".into(),
            })?;
            Command::Move { direction, distance }
        }
        v if TURN_VERBS.contains(&v) => {
            let direction = match cur.peek().map(|t| t.text.as_str()) {
                Some("left") => TurnDirection::Left,
                Some("right") => TurnDirection::Right,
                _ => return Err(cur.error(ParseErrorCode::MissingDirection, cur.peek(), "left | right")),
            };
            cur.bump();
            let (value, number) = magnitude(&mut cur, "<number> degrees")?;
            match cur.peek().map(|t| t.text.as_str()) {
                Some("degrees" | "deg") => {}
                _ => return Err(cur.error(ParseErrorCode::MissingUnit, cur.peek(), "degrees")),
            }
            cur.bump();
            let angle = Thousandths::from_units(value)
                .filter(|a| *a <= MAX_TURN)
                .ok_or_else(|| ParseError {
                    code: ParseErrorCode::BadNumber,
                    span: number.span.clone(),
                    expected: "an angle in (0, 360] degrees".into(),
                })?;
            Command::Turn { direction, angle }
        }
        "stop" | "halt" => Command::Stop,
        "send" => match cur.peek().map(|t| t.text.as_str()) {
            Some("image" | "picture" | "photo") => {
                cur.bump();
                Command::SendImage
            }
            _ => {
                let end = cur.peek().map_or(verb.span.end, |t| t.span.end);
                return Err(ParseError {
                    code: ParseErrorCode::UnknownVerb,
                    span: verb.span.start..end,
                    expected: "send image".into(),
                });
            }
        },
        _ => return Err(cur.error(ParseErrorCode::UnknownVerb, Some(&verb), VERBS)),
    };
    cur.finish()?;
    Ok(command)
}

fn magnitude(cur: &mut Cursor, expected: &str) -> Result<(f64, Token), ParseError> {
    let token = match cur.peek() {
        Some(t) => t.clone(),
        None => return Err(cur.error(ParseErrorCode::MissingMagnitude, None, expected)),
    };
    match parse_number(&token.text) {
        Some(v) => {
            cur.bump();
            Ok((v, token))
        }
        None if looks_numeric(&token.text) => Err(ParseError {
            code: ParseErrorCode::BadNumber,
            span: token.span,
            expected: "a decimal numeral or one..twenty".into(),
        }),
        None => Err(cur.error(ParseErrorCode::MissingMagnitude, Some(&token), expected)),
    }
}

/// True when `word` is a numeral or number word the grammar accepts.
pub fn is_number(word: &str) -> bool {
    parse_number(word).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mv(m: u64) -> Command {
        Command::Move {
            direction: LinearDirection::Forward,
            distance: Thousandths(m),
        }
    }

    #[test]
    fn five_feet() {
        assert_eq!(parse("move forward five feet"), Ok(mv(1524)));
        assert_eq!(parse("Move Forward 5 FT"), Ok(mv(1524)));
        assert_eq!(format(&mv(1524)), "move forward 1.524 m");
    }

    #[test]
    fn turns() {
        let left90 = Command::Turn {
            direction: TurnDirection::Left,
            angle: Thousandths(90_000),
        };
        assert_eq!(parse("turn left 90 degrees"), Ok(left90));
        assert_eq!(parse("rotate left ninety deg").unwrap_err().code, ParseErrorCode::MissingMagnitude);
        assert_eq!(format(&left90), "turn left 90 deg");
        let right = parse("turn right 90 deg").unwrap();
        assert_eq!(format(&right), "turn right 90 deg");
    }

    #[test]
    fn turn_without_magnitude() {
        let err = parse("turn left").unwrap_err();
        assert_eq!(err.code, ParseErrorCode::MissingMagnitude);
        assert_eq!(err.expected, "<number> degrees");
        assert_eq!(err.span, 9..9);
    }

    #[test]
    fn images_and_stop() {
        assert_eq!(parse("send image"), Ok(Command::SendImage));
        assert_eq!(parse("send photo"), Ok(Command::SendImage));
        assert_eq!(parse("halt"), Ok(Command::Stop));
        assert_eq!(parse("send help").unwrap_err().code, ParseErrorCode::UnknownVerb);
    }

    #[test]
    fn one_command_per_message() {
        let err = parse("move forward 5 feet and then turn").unwrap_err();
        assert_eq!(err.code, ParseErrorCode::TrailingInput);
        assert_eq!(err.span, 20..33);
    }

    #[test]
    fn error_codes() {
        assert_eq!(parse("").unwrap_err().code, ParseErrorCode::UnknownVerb);
        assert_eq!(parse("jump").unwrap_err().code, ParseErrorCode::UnknownVerb);
        assert_eq!(parse("move 5 feet").unwrap_err().code, ParseErrorCode::MissingDirection);
        assert_eq!(parse("move forward 5").unwrap_err().code, ParseErrorCode::MissingUnit);
        assert_eq!(parse("move forward 5 yards").unwrap_err().code, ParseErrorCode::MissingUnit);
        assert_eq!(parse("move forward -5 m").unwrap_err().code, ParseErrorCode::BadNumber);
        assert_eq!(parse("move forward 1.2.3 m").unwrap_err().code, ParseErrorCode::BadNumber);
        assert_eq!(parse("move forward 0 m").unwrap_err().code, ParseErrorCode::BadNumber);
        assert_eq!(parse("turn left 400 deg").unwrap_err().code, ParseErrorCode::BadNumber);
        assert_eq!(parse("turn left 90 radians").unwrap_err().code, ParseErrorCode::MissingUnit);
    }

    #[test]
    fn synonyms_share_a_canonical_form() {
        let a = parse("go ahead 2 meters").unwrap();
        let b = parse("drive forward two m").unwrap();
        assert_eq!(a, b);
        assert_eq!(format(&a), "move forward 2 m");
        assert_eq!(format(&parse("move backwards 0.5 meter").unwrap()), "move back 0.5 m");
    }

    #[test]
    fn compile_signs() {
        assert_eq!(compile(&mv(1524)), Compiled::Motion(Motion::Translate(1.524)));
        let right45 = parse("turn right 45 deg").unwrap();
        assert_eq!(compile(&right45), Compiled::Motion(Motion::Rotate(-45.0)));
        assert_eq!(compile(&Command::Stop), Compiled::Motion(Motion::Halt));
        assert_eq!(compile(&Command::SendImage), Compiled::CaptureImage);
        let back = parse("move back 1 m").unwrap();
        assert_eq!(compile(&back), Compiled::Motion(Motion::Translate(-1.0)));
    }

    #[test]
    fn spans_count_characters() {
        let err = parse("mövé forward").unwrap_err();
        assert_eq!(err.span, 0..4);
        let err = parse("move forward zwölf m").unwrap_err();
        assert_eq!(err.span, 13..18);
    }

    #[test]
    fn thousandths_display() {
        assert_eq!(Thousandths(1524).to_string(), "1.524");
        assert_eq!(Thousandths(1500).to_string(), "1.5");
        assert_eq!(Thousandths(2000).to_string(), "2");
        assert_eq!(Thousandths(5).to_string(), "0.005");
    }
}
