//! Tiny arithmetic-expression language for coefficient and boundary fields in
//! run configurations: variables (`x`, `y`, `theta`, ...), literals, `+ - * /
//! ^`, and a fixed function set (sin, cos, tan, exp, log, sqrt, abs, pow,
//! min, max).

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            ',' => {
                out.push(Token::Comma);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == '.'
                        || bytes[i] == 'e'
                        || bytes[i] == 'E'
                        || ((bytes[i] == '+' || bytes[i] == '-')
                            && i > start
                            && (bytes[i - 1] == 'e' || bytes[i - 1] == 'E')))
                {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                let v = text
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number literal '{text}'")))?;
                out.push(Token::Num(v));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(bytes[start..i].iter().collect()));
            }
            other => return Err(Error::Config(format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Token) -> Result<()> {
        match self.next() {
            Some(found) if found == t => Ok(()),
            found => Err(Error::Config(format!("expected {t:?}, found {found:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Token::Slash) => {
                    self.next();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary minus binds looser than ^, so -x^2 is -(x^2)
    fn factor(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.next();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.next();
            // right associative; the exponent may carry its own unary minus
            let exp = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Num(v)),
            Some(Token::Ident(name)) => {
                if matches!(self.peek(), Some(Token::LParen)) {
                    self.next();
                    let mut args = Vec::new();
                    if !matches!(self.peek(), Some(Token::RParen)) {
                        loop {
                            args.push(self.expr()?);
                            match self.peek() {
                                Some(Token::Comma) => {
                                    self.next();
                                }
                                _ => break,
                            }
                        }
                    }
                    self.expect(Token::RParen)?;
                    Ok(Expr::Call(name, args))
                } else {
                    match name.as_str() {
                        "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                        _ => Ok(Expr::Var(name)),
                    }
                }
            }
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            found => Err(Error::Config(format!("unexpected token {found:?}"))),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { tokens: tokenize(src)?, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Config(format!(
                "trailing tokens after expression in '{src}'"
            )));
        }
        Ok(e)
    }

    /// Evaluates with variables bound positionally by `names`/`values`.
    pub fn eval(&self, names: &[&str], values: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(name) => {
                let idx = names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::Config(format!("unknown variable '{name}'")))?;
                values[idx]
            }
            Expr::Neg(e) => -e.eval(names, values)?,
            Expr::Add(a, b) => a.eval(names, values)? + b.eval(names, values)?,
            Expr::Sub(a, b) => a.eval(names, values)? - b.eval(names, values)?,
            Expr::Mul(a, b) => a.eval(names, values)? * b.eval(names, values)?,
            Expr::Div(a, b) => a.eval(names, values)? / b.eval(names, values)?,
            Expr::Pow(a, b) => a.eval(names, values)?.powf(b.eval(names, values)?),
            Expr::Call(name, args) => {
                let vals: Vec<f64> = args
                    .iter()
                    .map(|a| a.eval(names, values))
                    .collect::<Result<_>>()?;
                let arity = |want: usize| -> Result<()> {
                    if vals.len() == want {
                        Ok(())
                    } else {
                        Err(Error::Config(format!(
                            "function '{name}' takes {want} argument(s), got {}",
                            vals.len()
                        )))
                    }
                };
                match name.as_str() {
                    "sin" => {
                        arity(1)?;
                        vals[0].sin()
                    }
                    "cos" => {
                        arity(1)?;
                        vals[0].cos()
                    }
                    "tan" => {
                        arity(1)?;
                        vals[0].tan()
                    }
                    "exp" => {
                        arity(1)?;
                        vals[0].exp()
                    }
                    "log" => {
                        arity(1)?;
                        vals[0].ln()
                    }
                    "sqrt" => {
                        arity(1)?;
                        vals[0].sqrt()
                    }
                    "abs" => {
                        arity(1)?;
                        vals[0].abs()
                    }
                    "pow" => {
                        arity(2)?;
                        vals[0].powf(vals[1])
                    }
                    "min" => {
                        arity(2)?;
                        vals[0].min(vals[1])
                    }
                    "max" => {
                        arity(2)?;
                        vals[0].max(vals[1])
                    }
                    other => {
                        return Err(Error::Config(format!("unknown function '{other}'")))
                    }
                }
            }
        })
    }

    /// True if the expression references no variables.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(e) => e.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.is_constant() && b.is_constant(),
            Expr::Call(_, args) => args.iter().all(Expr::is_constant),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn arithmetic_and_precedence() {
        let e = Expr::parse("1 + 2*3^2 - 4/2").unwrap();
        assert_relative_eq!(e.eval(&[], &[]).unwrap(), 17.0);
        let e = Expr::parse("-x^2").unwrap();
        assert_relative_eq!(e.eval(&["x"], &[3.0]).unwrap(), -9.0);
        let e = Expr::parse("2^3^2").unwrap(); // right assoc
        assert_relative_eq!(e.eval(&[], &[]).unwrap(), 512.0);
    }

    #[test]
    fn functions_and_variables() {
        let e = Expr::parse("-x*x/8 + y*y/2").unwrap();
        assert_relative_eq!(e.eval(&["x", "y"], &[2.0, 1.0]).unwrap(), 0.0);
        let e = Expr::parse("0.1 + (1 - cos(theta))/2").unwrap();
        assert_relative_eq!(
            e.eval(&["theta"], &[std::f64::consts::PI]).unwrap(),
            1.1,
            epsilon = 1e-15
        );
        let e = Expr::parse("pow(abs(x), 1.5) + max(x, 0)").unwrap();
        assert_relative_eq!(e.eval(&["x"], &[-4.0]).unwrap(), 8.0);
        assert_relative_eq!(Expr::parse("sin(pi)").unwrap().eval(&[], &[]).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_detection() {
        assert!(Expr::parse("3*exp(1)").unwrap().is_constant());
        assert!(!Expr::parse("3*x").unwrap().is_constant());
    }

    #[test]
    fn parse_errors() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(1)").unwrap().eval(&[], &[]).is_err());
        assert!(Expr::parse("x $ y").is_err());
        assert!(Expr::parse("sin(1, 2)").unwrap().eval(&[], &[]).is_err());
        assert!(Expr::parse("(1").is_err());
    }

    #[test]
    fn unknown_variable_errors() {
        let e = Expr::parse("x + z").unwrap();
        assert!(e.eval(&["x"], &[1.0]).is_err());
    }
}
