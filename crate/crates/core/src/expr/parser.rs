use super::{BinaryOp, ExprError, Node, UnaryOp};

const MAX_EXPONENT: f64 = 1024.0;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

pub(super) struct Parser<'a> {
    src: &'a str,
    tokens: Vec<(Token, usize)>,
    cursor: usize,
}

fn syntax(pos: usize, message: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        pos,
        message: message.into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Token::Plus,
            b'-' => Token::Minus,
            b'*' => Token::Star,
            b'/' => Token::Slash,
            b'^' => Token::Caret,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| syntax(start, format!("malformed number `{text}`")))?;
                if !value.is_finite() {
                    return Err(syntax(start, format!("number `{text}` is out of range")));
                }
                out.push((Token::Number(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Token::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(syntax(start, format!("unexpected character `{ch}`")));
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Token::End, src.len()));
    Ok(out)
}

impl<'a> Parser<'a> {
    pub(super) fn new(src: &'a str) -> Self {
        Parser {
            src,
            tokens: Vec::new(),
            cursor: 0,
        }
    }

    pub(super) fn parse(mut self) -> Result<Node, ExprError> {
        self.tokens = tokenize(self.src)?;
        if matches!(self.peek(), Token::End) {
            return Err(syntax(0, "empty expression"));
        }
        let node = self.expr()?;
        match self.peek() {
            Token::End => Ok(node),
            Token::RParen => Err(syntax(self.pos(), "unmatched `)`")),
            _ => Err(syntax(self.pos(), "expected an operator")),
        }
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.cursor].0
    }

    fn pos(&self) -> usize {
        self.tokens[self.cursor].1
    }

    fn bump(&mut self) -> (Token, usize) {
        let tok = self.tokens[self.cursor].clone();
        if self.cursor + 1 < self.tokens.len() {
            self.cursor += 1;
        }
        tok
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinaryOp::Add,
                Token::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinaryOp::Mul,
                Token::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Token::Minus => {
                self.bump();
                Ok(Node::Unary(UnaryOp::Neg, Box::new(self.unary()?)))
            }
            Token::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if !matches!(self.peek(), Token::Caret) {
            return Ok(base);
        }
        self.bump();
        let exp_pos = self.pos();
        let exponent = self.unary()?;
        if exponent.depends_on_time() {
            return Err(ExprError::BadExponent { pos: exp_pos });
        }
        let n = exponent
            .eval(0.0f64)
            .map_err(|_| ExprError::BadExponent { pos: exp_pos })?;
        if n < 0.0 || n.fract() != 0.0 || n > MAX_EXPONENT {
            return Err(ExprError::BadExponent { pos: exp_pos });
        }
        Ok(Node::Pow(Box::new(base), n as u32))
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let (tok, pos) = self.bump();
        match tok {
            Token::Number(v) => Ok(Node::Const(v)),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                let op = match name.as_str() {
                    "t" => return Ok(Node::Time),
                    "abs" => UnaryOp::Abs,
                    "exp" => UnaryOp::Exp,
                    "sin" => UnaryOp::Sin,
                    "cos" => UnaryOp::Cos,
                    "sqrt" => UnaryOp::Sqrt,
                    _ => return Err(ExprError::UnknownIdentifier { name, pos }),
                };
                if !matches!(self.peek(), Token::LParen) {
                    return Err(syntax(self.pos(), format!("expected `(` after `{name}`")));
                }
                self.bump();
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(Node::Unary(op, Box::new(arg)))
            }
            Token::End => Err(syntax(pos, "unexpected end of input")),
            other => Err(syntax(pos, format!("unexpected token {other:?}"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.peek() {
            Token::RParen => {
                self.bump();
                Ok(())
            }
            Token::End => Err(syntax(self.pos(), "missing `)`")),
            _ => Err(syntax(self.pos(), "expected `)`")),
        }
    }
}
