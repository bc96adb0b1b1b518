use super::Expr;
use crate::rational::{parse_rational, Rational};
use crate::{Error, Result};

const MAX_POWER: i64 = 64;

/// Parses the surface DSL.
///
/// ```text
/// expr   := term (('+'|'-') term)*
/// term   := factor (('*'|'/') factor)*
/// factor := '-' factor | atom ('^' int)?
/// atom   := 'x' | 'y' | number | '(' expr ')' | 'abs(' expr ')' | 'root(' expr ',' int ')'
/// ```
pub fn parse_expr(text: &str) -> Result<Expr> {
    let mut p = Parser { src: text, chars: text.char_indices().collect(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error("expected operator or end of input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        let offset = self.chars.get(self.pos).map_or(self.src.len(), |(i, _)| *i);
        let before = &self.src[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        let found = self
            .chars
            .get(self.pos)
            .map_or("end of input".to_string(), |(_, c)| format!("'{c}'"));
        Error::Syntax { line, column, message: format!("{message}, found {found}") }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|(_, c)| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|(_, c)| *c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn keyword(&mut self, word: &str) -> bool {
        self.skip_ws();
        let n = word.chars().count();
        let matches = self.chars.len() >= self.pos + n
            && self.chars[self.pos..self.pos + n].iter().map(|(_, c)| *c).eq(word.chars());
        if matches {
            self.pos += n;
        }
        matches
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            let k = self.exponent()?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    /// Signed integer after `^`; anything fractional is rejected.
    fn exponent(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        let neg = self.eat('-');
        self.skip_ws();
        let digits_start = self.pos;
        while self.chars.get(self.pos).is_some_and(|(_, c)| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == digits_start {
            if matches!(self.peek(), Some('(')) {
                return Err(Error::NonIntegerExponent);
            }
            self.pos = start;
            return Err(self.error("expected integer exponent"));
        }
        if matches!(self.chars.get(self.pos), Some((_, '.'))) {
            return Err(Error::NonIntegerExponent);
        }
        let text: String = self.chars[digits_start..self.pos].iter().map(|(_, c)| c).collect();
        let k: i64 = text.parse().map_err(|_| Error::ExponentTooLarge(i64::MAX))?;
        let k = if neg { -k } else { k };
        if k.abs() > MAX_POWER {
            return Err(Error::ExponentTooLarge(k));
        }
        Ok(k)
    }

    fn integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let neg = self.eat('-');
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|(_, c)| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected integer"));
        }
        let text: String = self.chars[start..self.pos].iter().map(|(_, c)| c).collect();
        let v: i64 = text.parse().map_err(|_| self.error("integer out of range"))?;
        Ok(if neg { -v } else { v })
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digit = |p: &Self, i: usize| p.chars.get(i).is_some_and(|(_, c)| c.is_ascii_digit());
        while digit(self, self.pos) {
            self.pos += 1;
        }
        let mut is_integer = true;
        if matches!(self.chars.get(self.pos), Some((_, '.'))) {
            is_integer = false;
            self.pos += 1;
            while digit(self, self.pos) {
                self.pos += 1;
            }
        }
        // `p/q` with an integer numerator and an immediately following digit is a literal ratio.
        if is_integer && matches!(self.chars.get(self.pos), Some((_, '/'))) && digit(self, self.pos + 1) {
            self.pos += 1;
            while digit(self, self.pos) {
                self.pos += 1;
            }
        }
        let text: String = self.chars[start..self.pos].iter().map(|(_, c)| c).collect();
        let r: Rational = parse_rational(&text).ok_or_else(|| {
            self.pos = start;
            self.error("malformed number")
        })?;
        Ok(Expr::Num(r))
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some('a') if self.keyword("abs") => {
                self.expect('(')?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(Expr::Abs(Box::new(e)))
            }
            Some('r') if self.keyword("root") => {
                self.expect('(')?;
                let e = self.expr()?;
                self.expect(',')?;
                let n = self.integer()?;
                self.expect(')')?;
                if n < 3 || n % 2 == 0 {
                    return Err(Error::EvenRootIndex(n));
                }
                Ok(Expr::Root(Box::new(e), n))
            }
            Some('x') => {
                self.pos += 1;
                Ok(Expr::X)
            }
            Some('y') => {
                self.pos += 1;
                Ok(Expr::Y)
            }
            _ => Err(self.error("expected 'x', 'y', number, '(', 'abs(' or 'root('")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(e: Expr) -> Box<Expr> {
        Box::new(e)
    }
    fn num(n: i128) -> Expr {
        Expr::Num(Rational::from_integer(n))
    }

    #[test]
    fn quotient_structure() {
        let e = parse_expr("y^4/(x^2+y^2)").unwrap();
        let want = Expr::Div(
            b(Expr::Pow(b(Expr::Y), 4)),
            b(Expr::Add(b(Expr::Pow(b(Expr::X), 2)), b(Expr::Pow(b(Expr::Y), 2)))),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn cube_root_node() {
        match parse_expr("root((x^2+y^2)*(x^2-y^3), 3)").unwrap() {
            Expr::Root(inner, 3) => assert!(matches!(*inner, Expr::Mul(..))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_even_root() {
        assert_eq!(parse_expr("root(x, 2)"), Err(Error::EvenRootIndex(2)));
        assert_eq!(parse_expr("root(x, 1)"), Err(Error::EvenRootIndex(1)));
    }

    #[test]
    fn rejects_fractional_exponent() {
        assert_eq!(parse_expr("x^1.5"), Err(Error::NonIntegerExponent));
        assert_eq!(parse_expr("x^(1/2)"), Err(Error::NonIntegerExponent));
        assert_eq!(parse_expr("x^65"), Err(Error::ExponentTooLarge(65)));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expr("1 - x - y").unwrap();
        assert_eq!(e, Expr::Sub(b(Expr::Sub(b(num(1)), b(Expr::X))), b(Expr::Y)));
        let e = parse_expr("2*x^3").unwrap();
        assert_eq!(e, Expr::Mul(b(num(2)), b(Expr::Pow(b(Expr::X), 3))));
        let e = parse_expr("-x^2").unwrap();
        assert_eq!(e, Expr::Neg(b(Expr::Pow(b(Expr::X), 2))));
    }

    #[test]
    fn ratio_literal_versus_division() {
        assert_eq!(parse_expr("3/4").unwrap(), Expr::Num(Rational::new(3, 4)));
        assert_eq!(parse_expr("x/4").unwrap(), Expr::Div(b(Expr::X), b(num(4))));
        assert_eq!(parse_expr("y^4/2").unwrap(), Expr::Div(b(Expr::Pow(b(Expr::Y), 4)), b(num(2))));
    }

    #[test]
    fn syntax_error_position() {
        match parse_expr("x +\n  * y") {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_expr("(x"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expr("x y"), Err(Error::Syntax { .. })));
    }
}
