//! Predicate expressions and their text syntax.
//!
//! ```text
//! union   := combine ('|' combine)*
//! combine := succ ('(*)' succ)*
//! succ    := post ('~>' post)*
//! post    := primary ('^w')*
//! primary := 'total' | 'crash1@' INT | 'crash(' INT ')' | 'loss(' INT ')' | '(' union ')'
//! ```
//!
//! All binary operators are left-associative. `∪`, `⊗`, `⇝` and `^ω` are
//! accepted as aliases of `|`, `(*)`, `~>` and `^w`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PredicateExpr {
    Total,
    /// At most one crash, happening at the given round.
    Crash1At(usize),
    /// At most `F` permanent crashes.
    Crash(usize),
    /// At most `L` message losses over the whole execution.
    Loss(usize),
    /// A hand-built set of collections; not expressible in the text syntax.
    Literal(String),
    Union(Box<PredicateExpr>, Box<PredicateExpr>),
    Combine(Box<PredicateExpr>, Box<PredicateExpr>),
    Succeed(Box<PredicateExpr>, Box<PredicateExpr>),
    Repeat(Box<PredicateExpr>),
}

impl PredicateExpr {
    pub fn union(a: PredicateExpr, b: PredicateExpr) -> Self {
        PredicateExpr::Union(Box::new(a), Box::new(b))
    }

    pub fn combine(a: PredicateExpr, b: PredicateExpr) -> Self {
        PredicateExpr::Combine(Box::new(a), Box::new(b))
    }

    pub fn succeed(a: PredicateExpr, b: PredicateExpr) -> Self {
        PredicateExpr::Succeed(Box::new(a), Box::new(b))
    }

    pub fn repeat(a: PredicateExpr) -> Self {
        PredicateExpr::Repeat(Box::new(a))
    }

    fn precedence(&self) -> u8 {
        match self {
            PredicateExpr::Union(..) => 1,
            PredicateExpr::Combine(..) => 2,
            PredicateExpr::Succeed(..) => 3,
            PredicateExpr::Repeat(..) => 4,
            _ => 5,
        }
    }

    fn write_operand(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for PredicateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prec = self.precedence();
        let binary = |f: &mut fmt::Formatter<'_>, a: &PredicateExpr, op: &str, b: &PredicateExpr| {
            a.write_operand(f, a.precedence() < prec)?;
            write!(f, " {op} ")?;
            b.write_operand(f, b.precedence() <= prec)
        };
        match self {
            PredicateExpr::Total => f.write_str("total"),
            PredicateExpr::Crash1At(r) => write!(f, "crash1@{r}"),
            PredicateExpr::Crash(k) => write!(f, "crash({k})"),
            PredicateExpr::Loss(k) => write!(f, "loss({k})"),
            PredicateExpr::Literal(label) => write!(f, "literal[{label}]"),
            PredicateExpr::Union(a, b) => binary(f, a, "|", b),
            PredicateExpr::Combine(a, b) => binary(f, a, "(*)", b),
            PredicateExpr::Succeed(a, b) => binary(f, a, "~>", b),
            PredicateExpr::Repeat(a) => {
                a.write_operand(f, a.precedence() < prec)?;
                f.write_str("^w")
            }
        }
    }
}

impl FromStr for PredicateExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_expr(s)
    }
}

/// Parses the text syntax. Error positions are 0-based character offsets.
pub fn parse_expr(text: &str) -> Result<PredicateExpr> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
    };
    let e = p.union()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error(format!("unexpected '{}'", p.chars[p.pos])));
    }
    Ok(e)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn looking_at(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(k, c)| self.chars.get(self.pos + k) == Some(&c))
    }

    /// Consumes the first matching spelling, after skipping whitespace.
    fn eat(&mut self, spellings: &[&str]) -> bool {
        self.skip_ws();
        for s in spellings {
            if self.looking_at(s) {
                self.pos += s.chars().count();
                return true;
            }
        }
        false
    }

    fn union(&mut self) -> Result<PredicateExpr> {
        let mut lhs = self.combine()?;
        while self.eat(&["|", "∪"]) {
            let rhs = self.combine()?;
            lhs = PredicateExpr::union(lhs, rhs);
        }
        Ok(lhs)
    }

    fn combine(&mut self) -> Result<PredicateExpr> {
        let mut lhs = self.succession()?;
        while self.eat(&["(*)", "⊗"]) {
            let rhs = self.succession()?;
            lhs = PredicateExpr::combine(lhs, rhs);
        }
        Ok(lhs)
    }

    fn succession(&mut self) -> Result<PredicateExpr> {
        let mut lhs = self.postfix()?;
        while self.eat(&["~>", "⇝"]) {
            let rhs = self.postfix()?;
            lhs = PredicateExpr::succeed(lhs, rhs);
        }
        Ok(lhs)
    }

    fn postfix(&mut self) -> Result<PredicateExpr> {
        let mut e = self.primary()?;
        while self.eat(&["^w", "^ω", "ω"]) {
            e = PredicateExpr::repeat(e);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<PredicateExpr> {
        self.skip_ws();
        if self.looking_at("(*)") {
            return Err(self.error("operator '(*)' is missing its left operand"));
        }
        if self.eat(&["("]) {
            let e = self.union()?;
            if !self.eat(&[")"]) {
                return Err(self.error("expected ')'"));
            }
            return Ok(e);
        }
        if self.eat(&["total"]) {
            return Ok(PredicateExpr::Total);
        }
        if self.eat(&["crash1@"]) {
            let start = self.pos;
            let r = self.integer()?;
            if r == 0 {
                return Err(Error::Syntax {
                    position: start,
                    message: "crash round must be at least 1".into(),
                });
            }
            return Ok(PredicateExpr::Crash1At(r));
        }
        if self.eat(&["crash("]) {
            let k = self.integer()?;
            self.expect_close()?;
            return Ok(PredicateExpr::Crash(k));
        }
        if self.eat(&["loss("]) {
            let k = self.integer()?;
            self.expect_close()?;
            return Ok(PredicateExpr::Loss(k));
        }
        if self.pos >= self.chars.len() {
            return Err(self.error("unexpected end of input"));
        }
        Err(self.error(format!("unexpected '{}'", self.chars[self.pos])))
    }

    fn expect_close(&mut self) -> Result<()> {
        if self.eat(&[")"]) {
            Ok(())
        } else {
            Err(self.error("expected ')'"))
        }
    }

    fn integer(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected an integer"));
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        digits.parse().map_err(|_| Error::Syntax {
            position: start,
            message: format!("integer '{digits}' is out of range"),
        })
    }
}

/// Named constructions from the table of composed fault models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `∪_{i≤R} crash1@i`
    Crash1,
    /// `⊗^F crash1`
    CrashF(usize),
    /// `crash1 ~> total`
    Recover1,
    RecoverF(usize),
    /// `recover1 | crash1`
    CanRecover1,
    CanRecoverF(usize),
    /// `crash1^w`
    Recovery1,
    RecoveryF(usize),
    /// `∪_{r≤i≤R} crash1@i`
    Crash1From(usize),
    /// Union over pairwise distinct rounds `i_1..i_F` of `⊗_j crash1@i_j`.
    CrashDistinct(usize),
}

impl Preset {
    pub fn expr(self, horizon: usize) -> Result<PredicateExpr> {
        let fold_union = |items: Vec<PredicateExpr>| {
            items
                .into_iter()
                .reduce(PredicateExpr::union)
                .ok_or(Error::EmptyPredicate)
        };
        let power = |e: PredicateExpr, f: usize| -> Result<PredicateExpr> {
            if f == 0 {
                return Ok(PredicateExpr::Total);
            }
            Ok(std::iter::repeat_n(e, f).reduce(PredicateExpr::combine).unwrap())
        };
        let crash1 = || fold_union((1..=horizon).map(PredicateExpr::Crash1At).collect());
        let recover1 = || -> Result<PredicateExpr> {
            Ok(PredicateExpr::succeed(crash1()?, PredicateExpr::Total))
        };
        let canrecover1 = || -> Result<PredicateExpr> {
            Ok(PredicateExpr::union(recover1()?, crash1()?))
        };
        let recovery1 = || -> Result<PredicateExpr> { Ok(PredicateExpr::repeat(crash1()?)) };
        match self {
            Preset::Crash1 => crash1(),
            Preset::CrashF(f) => power(crash1()?, f),
            Preset::Recover1 => recover1(),
            Preset::RecoverF(f) => power(recover1()?, f),
            Preset::CanRecover1 => canrecover1(),
            Preset::CanRecoverF(f) => power(canrecover1()?, f),
            Preset::Recovery1 => recovery1(),
            Preset::RecoveryF(f) => power(recovery1()?, f),
            Preset::Crash1From(r) => {
                if r == 0 || r > horizon {
                    return Err(Error::RoundOutOfRange { round: r, horizon });
                }
                fold_union((r..=horizon).map(PredicateExpr::Crash1At).collect())
            }
            Preset::CrashDistinct(f) => {
                if f == 0 {
                    return Ok(PredicateExpr::Total);
                }
                if f > horizon {
                    return Err(Error::InvalidParameter(format!(
                        "{f} crashes in distinct rounds need a horizon of at least {f}"
                    )));
                }
                let mut terms = Vec::new();
                for rounds in increasing_tuples(horizon, f) {
                    let term = rounds
                        .into_iter()
                        .map(PredicateExpr::Crash1At)
                        .reduce(PredicateExpr::combine)
                        .unwrap();
                    terms.push(term);
                }
                fold_union(terms)
            }
        }
    }
}

/// Strictly increasing tuples of length `k` over `1..=max`. Combination is
/// commutative, so these cover every pairwise-distinct choice of rounds.
fn increasing_tuples(max: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, max: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=max {
            cur.push(i);
            go(i + 1, max, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(1, max, k, &mut Vec::new(), &mut out);
    out
}

impl FromStr for Preset {
    type Err = Error;

    /// `crash1`, `crashF:2`, `recover1`, `recoverF:2`, `canrecover1`,
    /// `canrecoverF:2`, `recovery1`, `recoveryF:2`, `crash1-from:2`,
    /// `crash-distinct:2`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((name, arg)) => {
                let v = arg
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidParameter(format!("bad preset argument '{arg}'")))?;
                (name, Some(v))
            }
            None => (s, None),
        };
        let need = |arg: Option<usize>| {
            arg.ok_or_else(|| Error::InvalidParameter(format!("preset '{name}' needs an argument")))
        };
        Ok(match name {
            "crash1" => Preset::Crash1,
            "crashF" => Preset::CrashF(need(arg)?),
            "recover1" => Preset::Recover1,
            "recoverF" => Preset::RecoverF(need(arg)?),
            "canrecover1" => Preset::CanRecover1,
            "canrecoverF" => Preset::CanRecoverF(need(arg)?),
            "recovery1" => Preset::Recovery1,
            "recoveryF" => Preset::RecoveryF(need(arg)?),
            "crash1-from" => Preset::Crash1From(need(arg)?),
            "crash-distinct" => Preset::CrashDistinct(need(arg)?),
            other => return Err(Error::InvalidParameter(format!("unknown preset '{other}'"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use PredicateExpr::*;

    #[test]
    fn succession_of_crash_and_total() {
        assert_eq!(
            parse_expr("crash(1) ~> total").unwrap(),
            PredicateExpr::succeed(Crash(1), Total)
        );
    }

    #[test]
    fn repetition_of_parenthesised_atom() {
        assert_eq!(parse_expr("(crash1@1)^w").unwrap(), PredicateExpr::repeat(Crash1At(1)));
    }

    #[test]
    fn unterminated_call_reports_position() {
        assert_eq!(
            parse_expr("crash("),
            Err(Error::Syntax {
                position: 6,
                message: "expected an integer".into()
            })
        );
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expr("total | crash(1) (*) loss(1) ~> crash1@2^w").unwrap();
        let expected = PredicateExpr::union(
            Total,
            PredicateExpr::combine(
                Crash(1),
                PredicateExpr::succeed(Loss(1), PredicateExpr::repeat(Crash1At(2))),
            ),
        );
        assert_eq!(e, expected);
        let left = parse_expr("total ~> crash(1) ~> total").unwrap();
        assert_eq!(
            left,
            PredicateExpr::succeed(PredicateExpr::succeed(Total, Crash(1)), Total)
        );
    }

    #[test]
    fn unicode_aliases() {
        assert_eq!(
            parse_expr("crash(1) ⊗ (crash1@1 ⇝ total)^ω ∪ total").unwrap(),
            parse_expr("crash(1) (*) (crash1@1 ~> total)^w | total").unwrap()
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_expr("crash1@0"), Err(Error::Syntax { position: 7, .. })));
        assert!(matches!(parse_expr("total |"), Err(Error::Syntax { position: 7, .. })));
        assert!(matches!(parse_expr("(total"), Err(Error::Syntax { position: 6, .. })));
        assert!(matches!(parse_expr("total total"), Err(Error::Syntax { position: 6, .. })));
        assert!(matches!(parse_expr("bogus"), Err(Error::Syntax { position: 0, .. })));
        assert!(parse_expr("loss(99999999999999999999999)").is_err());
    }

    #[test]
    fn presets_follow_table() {
        assert_eq!(Preset::Crash1.expr(2).unwrap().to_string(), "crash1@1 | crash1@2");
        assert_eq!(
            Preset::Recover1.expr(2).unwrap().to_string(),
            "(crash1@1 | crash1@2) ~> total"
        );
        assert_eq!(
            Preset::CrashDistinct(2).expr(3).unwrap().to_string(),
            "crash1@1 (*) crash1@2 | crash1@1 (*) crash1@3 | crash1@2 (*) crash1@3"
        );
        assert_eq!("recoveryF:2".parse::<Preset>().unwrap(), Preset::RecoveryF(2));
        assert!("recoveryF".parse::<Preset>().is_err());
        assert!(Preset::CrashDistinct(3).expr(2).is_err());
    }

    fn arb_expr() -> impl Strategy<Value = PredicateExpr> {
        let leaf = prop_oneof![
            Just(Total),
            (1usize..4).prop_map(Crash1At),
            (0usize..3).prop_map(Crash),
            (0usize..3).prop_map(Loss),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| PredicateExpr::union(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| PredicateExpr::combine(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| PredicateExpr::succeed(a, b)),
                inner.prop_map(PredicateExpr::repeat),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(e in arb_expr()) {
            prop_assert_eq!(parse_expr(&e.to_string()).unwrap(), e);
        }
    }
}
