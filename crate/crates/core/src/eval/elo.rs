//! Sequential ELO ratings with K = 32, and rank buckets where neighbours
//! within the tie margin share a rank.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const K_FACTOR: f64 = 32.0;
pub const DEFAULT_INITIAL: f64 = 1000.0;
pub const TIE_MARGIN: f64 = 16.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EloError {
    #[error("unknown outcome {0:?}, expected A, B or D")]
    UnknownOutcome(String),
    #[error("player name is empty")]
    EmptyName,
    #[error("player {0:?} cannot play itself")]
    SamePlayer(String),
    #[error("line {line}: expected `player_a,player_b,outcome`")]
    Malformed { line: usize },
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<EloError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    A,
    B,
    Draw,
}

impl Outcome {
    /// Score for player A.
    pub fn score_a(self) -> f64 {
        match self {
            Outcome::A => 1.0,
            Outcome::B => 0.0,
            Outcome::Draw => 0.5,
        }
    }
}

impl FromStr for Outcome {
    type Err = EloError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Outcome::A),
            "B" => Ok(Outcome::B),
            "D" => Ok(Outcome::Draw),
            other => Err(EloError::UnknownOutcome(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchRecord {
    pub player_a: String,
    pub player_b: String,
    pub outcome: Outcome,
}

impl MatchRecord {
    pub fn new(a: impl Into<String>, b: impl Into<String>, outcome: Outcome) -> Result<Self, EloError> {
        let (player_a, player_b) = (a.into(), b.into());
        if player_a.is_empty() || player_b.is_empty() {
            return Err(EloError::EmptyName);
        }
        if player_a == player_b {
            return Err(EloError::SamePlayer(player_a));
        }
        Ok(Self {
            player_a,
            player_b,
            outcome,
        })
    }
}

/// Parses `player_a,player_b,outcome` lines. Blank lines are skipped.
pub fn parse_match_log(text: &str) -> Result<Vec<MatchRecord>, EloError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        let [a, b, o] = fields[..] else {
            return Err(EloError::Malformed { line });
        };
        let wrap = |e| EloError::Line {
            line,
            source: Box::new(e),
        };
        let outcome = o.parse().map_err(wrap)?;
        out.push(MatchRecord::new(a, b, outcome).map_err(wrap)?);
    }
    Ok(out)
}

pub fn expected_score(r_a: f64, r_b: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((r_b - r_a) / 400.0))
}

/// One rated game. B moves by exactly the opposite of A, so the pair's sum
/// is unchanged.
pub fn elo_update(r_a: f64, r_b: f64, outcome: Outcome) -> (f64, f64) {
    let delta = K_FACTOR * (outcome.score_a() - expected_score(r_a, r_b));
    (r_a + delta, r_b - delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingTable {
    ratings: BTreeMap<String, f64>,
    pub k_factor: f64,
    pub initial: f64,
}

impl Default for RatingTable {
    fn default() -> Self {
        Self::new(DEFAULT_INITIAL)
    }
}

impl RatingTable {
    pub fn new(initial: f64) -> Self {
        Self {
            ratings: BTreeMap::new(),
            k_factor: K_FACTOR,
            initial,
        }
    }

    pub fn from_ratings(ratings: impl IntoIterator<Item = (String, f64)>, initial: f64) -> Self {
        Self {
            ratings: ratings.into_iter().collect(),
            ..Self::new(initial)
        }
    }

    /// Plays the records in order.
    pub fn tournament(records: &[MatchRecord], initial: f64) -> Self {
        let mut t = Self::new(initial);
        for r in records {
            t.record(r);
        }
        t
    }

    /// Current rating; players not seen yet sit at the initial rating.
    pub fn rating(&self, player: &str) -> f64 {
        self.ratings.get(player).copied().unwrap_or(self.initial)
    }

    pub fn record(&mut self, m: &MatchRecord) {
        let (a, b) = elo_update(self.rating(&m.player_a), self.rating(&m.player_b), m.outcome);
        self.ratings.insert(m.player_a.clone(), a);
        self.ratings.insert(m.player_b.clone(), b);
    }

    pub fn ratings(&self) -> &BTreeMap<String, f64> {
        &self.ratings
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.ratings.values().sum()
    }

    /// Players sorted by rating, best first; equal ratings by name.
    pub fn standings(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.ratings.iter().map(|(k, &r)| (k.as_str(), r)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        v
    }

    pub fn rank_buckets(&self, tie_margin: f64) -> BTreeMap<String, usize> {
        let standings = self.standings();
        let ratings: Vec<f64> = standings.iter().map(|s| s.1).collect();
        standings
            .iter()
            .zip(rank_ratings(&ratings, tie_margin))
            .map(|(s, r)| (s.0.to_string(), r))
            .collect()
    }
}

impl fmt::Display for RatingTable {
    /// `name=rating` lines, best first, one decimal place.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, r) in self.standings() {
            writeln!(f, "{name}={r:.1}")?;
        }
        Ok(())
    }
}

/// Ranks for ratings, 1 = best. Sorted descending, players stay in one
/// bucket while each gap to the next is at most `tie_margin`. The result is
/// aligned with the input order.
pub fn rank_ratings(ratings: &[f64], tie_margin: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ratings.len()).collect();
    order.sort_by(|&a, &b| ratings[b].total_cmp(&ratings[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; ratings.len()];
    let mut rank = 0;
    let mut prev: Option<f64> = None;
    for i in order {
        if prev.is_none_or(|p| p - ratings[i] > tie_margin) {
            rank += 1;
        }
        ranks[i] = rank;
        prev = Some(ratings[i]);
    }
    ranks
}
