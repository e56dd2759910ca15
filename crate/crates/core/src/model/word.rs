use std::fmt;
use std::sync::Arc;

use super::orbit::PeriodicOrbit;
use super::system::{ChartId, CycleSystem};
use super::ModelError;
use crate::dd::{dd, to_f64, Dd};

/// One run-length-encoded piece of an itinerary.
#[derive(Debug, Clone)]
pub enum Token {
    /// `n` full periods near A.
    A(u64),
    /// `n` full periods near B.
    B(u64),
    /// The a-to-b transition with central translation `nu`.
    Tab(Dd),
    /// The b-to-a transition.
    Tba,
    /// `count` repetitions of an already realized orbit's word.
    Cycle { orbit: Arc<PeriodicOrbit>, count: u64 },
}

impl Token {
    pub fn tab(nu: f64) -> Token {
        Token::Tab(dd(nu))
    }

    pub fn cycle(orbit: Arc<PeriodicOrbit>, count: u64) -> Token {
        Token::Cycle { orbit, count }
    }

    pub fn len(&self, sys: &CycleSystem) -> u64 {
        let c = sys.central_data();
        match self {
            Token::A(n) => n * u64::from(c.pi_a),
            Token::B(n) => n * u64::from(c.pi_b),
            Token::Tab(_) => u64::from(c.t_ab),
            Token::Tba => u64::from(c.t_ba),
            Token::Cycle { orbit, count } => count * orbit.period,
        }
    }

    pub fn is_empty(&self, sys: &CycleSystem) -> bool {
        self.len(sys) == 0
    }

    fn first_chart(&self) -> ChartId {
        match self {
            Token::A(_) => ChartId::A(0),
            Token::B(_) => ChartId::B(0),
            Token::Tab(_) => ChartId::Ab(0),
            Token::Tba => ChartId::Ba(0),
            Token::Cycle { orbit, .. } => orbit.base.chart,
        }
    }

    fn last_chart(&self, sys: &CycleSystem) -> ChartId {
        let c = sys.central_data();
        match self {
            Token::A(_) => ChartId::A(c.pi_a - 1),
            Token::B(_) => ChartId::B(c.pi_b - 1),
            Token::Tab(_) => ChartId::Ab(c.t_ab - 1),
            Token::Tba => ChartId::Ba(c.t_ba - 1),
            Token::Cycle { orbit, .. } => orbit.word.last_chart(sys),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ItineraryWord {
    tokens: Vec<Token>,
}

impl ItineraryWord {
    /// Builds a word, dropping empty runs.
    pub fn new(tokens: Vec<Token>) -> Self {
        let tokens = tokens
            .into_iter()
            .filter(|t| !matches!(t, Token::A(0) | Token::B(0) | Token::Cycle { count: 0, .. }))
            .collect();
        Self { tokens }
    }

    /// `T_ba, a^l, T_ab(nu), b^m`.
    pub fn lm(l: u64, m: u64, nu: Dd) -> Self {
        Self::new(vec![Token::Tba, Token::A(l), Token::Tab(nu), Token::B(m)])
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn period(&self, sys: &CycleSystem) -> u64 {
        self.tokens.iter().map(|t| t.len(sys)).sum()
    }

    pub fn first_chart(&self) -> Option<ChartId> {
        self.tokens.first().map(Token::first_chart)
    }

    fn last_chart(&self, sys: &CycleSystem) -> ChartId {
        self.tokens.last().expect("non-empty word").last_chart(sys)
    }

    /// Checks that consecutive tokens chain, cyclically.
    pub fn check_closed(&self, sys: &CycleSystem) -> Result<(), ModelError> {
        if self.tokens.is_empty() {
            return Err(ModelError::MalformedWord("empty word".into()));
        }
        let n = self.tokens.len();
        for i in 0..n {
            let from = self.tokens[i].last_chart(sys);
            let to = self.tokens[(i + 1) % n].first_chart();
            if !sys.successors(from).contains(&to) {
                return Err(ModelError::MalformedWord(format!(
                    "token {i} ends in {from} but token {} starts in {to}",
                    (i + 1) % n
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ItineraryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match t {
                Token::A(n) => write!(f, "a^{n}")?,
                Token::B(n) => write!(f, "b^{n}")?,
                Token::Tab(nu) => write!(f, "T_ab({:e})", to_f64(*nu))?,
                Token::Tba => f.write_str("T_ba")?,
                Token::Cycle { orbit, count } => write!(f, "[P{}]^{count}", orbit.period)?,
            }
        }
        Ok(())
    }
}

/// A single step of an itinerary: the chart it leaves and the central action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Move {
    pub source: ChartId,
    pub slope: f64,
    pub intercept: Dd,
}

struct Frame<'a> {
    tokens: &'a [Token],
    tok: usize,
    step: u64,
}

/// Flat, cyclic stream of the moves of a word.
pub struct Moves<'a> {
    sys: &'a CycleSystem,
    stack: Vec<Frame<'a>>,
    /// Repetitions left for each `Cycle` frame below the top.
    reps: Vec<u64>,
    root: &'a [Token],
}

impl<'a> Moves<'a> {
    pub fn new(sys: &'a CycleSystem, word: &'a ItineraryWord) -> Self {
        Self {
            sys,
            stack: vec![Frame { tokens: &word.tokens, tok: 0, step: 0 }],
            reps: Vec::new(),
            root: &word.tokens,
        }
    }
}

impl Iterator for Moves<'_> {
    type Item = Move;

    fn next(&mut self) -> Option<Move> {
        let c = self.sys.central_data();
        loop {
            let frame = self.stack.last_mut().expect("stack never empties");
            if frame.tok == frame.tokens.len() {
                if self.stack.len() == 1 {
                    // Cyclic: restart the root word.
                    self.stack[0] = Frame { tokens: self.root, tok: 0, step: 0 };
                    continue;
                }
                let done = self.stack.pop().expect("inner frame");
                let left = self.reps.last_mut().expect("cycle reps");
                *left -= 1;
                if *left > 0 {
                    self.stack.push(Frame { tokens: done.tokens, tok: 0, step: 0 });
                } else {
                    self.reps.pop();
                    let parent = self.stack.last_mut().expect("parent frame");
                    parent.tok += 1;
                    parent.step = 0;
                }
                continue;
            }
            let token = &frame.tokens[frame.tok];
            let (source, intercept, len) = match token {
                Token::A(n) => {
                    let j = (frame.step % u64::from(c.pi_a)) as u32;
                    (ChartId::A(j), dd(0.0), n * u64::from(c.pi_a))
                }
                Token::B(n) => {
                    let j = (frame.step % u64::from(c.pi_b)) as u32;
                    (ChartId::B(j), dd(0.0), n * u64::from(c.pi_b))
                }
                Token::Tab(nu) => {
                    let j = frame.step as u32;
                    (ChartId::Ab(j), if j == 0 { *nu } else { dd(0.0) }, u64::from(c.t_ab))
                }
                Token::Tba => (ChartId::Ba(frame.step as u32), dd(0.0), u64::from(c.t_ba)),
                Token::Cycle { orbit, count } => {
                    let inner = &orbit.word.tokens;
                    self.reps.push(*count);
                    self.stack.push(Frame { tokens: inner, tok: 0, step: 0 });
                    continue;
                }
            };
            frame.step += 1;
            if frame.step == len {
                frame.tok += 1;
                frame.step = 0;
            }
            return Some(Move { source, slope: self.sys.central_slope(source), intercept });
        }
    }
}
