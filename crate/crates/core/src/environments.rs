//! Built-in benchmark games and the game-file loader.
//!
//! Action 0 is the first row/column of the payoff tables ("left" in Matching
//! Pennies, "cooperate" in the Prisoner's Dilemma).

use std::path::Path;

use ndarray::{Array3, Array4};

use crate::error::{Error, Result};
use crate::game::Game;

pub const BUILTIN_NAMES: [&str; 2] = ["matching-pennies", "prisoners-dilemma"];

/// Looks up a built-in game by name.
pub fn builtin(name: &str) -> Option<Game> {
    match name {
        "matching-pennies" | "mp" => Some(two_state_matching_pennies()),
        "prisoners-dilemma" | "pd" => Some(two_state_prisoners_dilemma()),
        _ => None,
    }
}

/// Builds a two-agent, two-action game from per-state payoff tables
/// `payoffs[s][a1][a2] = (r1, r2)` that do not depend on the next state.
fn two_player(
    payoffs: [[[(f64, f64); 2]; 2]; 2],
    next: impl Fn(usize, usize, usize, usize) -> f64,
) -> Game {
    let transitions = Array3::from_shape_fn((2, 4, 2), |(s, j, s2)| next(s, j / 2, j % 2, s2));
    let rewards = Array4::from_shape_fn((2, 2, 4, 2), |(i, s, j, _)| {
        let (r1, r2) = payoffs[s][j / 2][j % 2];
        if i == 0 { r1 } else { r2 }
    });
    Game::new(2, 2, 2, transitions, rewards).expect("built-in game is valid")
}

/// Two-state Matching Pennies: agent 1 keeps in state 1 and kicks in state 2.
/// Only agent 1's action moves the environment: action 0 leaves state 1,
/// action 1 leaves state 2.
pub fn two_state_matching_pennies() -> Game {
    two_player(
        [
            [[(1.0, 0.0), (0.0, 1.0)], [(0.0, 1.0), (1.0, 0.0)]],
            [[(0.0, 1.0), (1.0, 0.0)], [(1.0, 0.0), (0.0, 1.0)]],
        ],
        |s, a1, _a2, s2| {
            let leave = (s == 0 && a1 == 0) || (s == 1 && a1 == 1);
            if leave == (s != s2) { 1.0 } else { 0.0 }
        },
    )
}

/// Two-state Prisoner's Dilemma: equal actions switch state with probability
/// 0.1, unequal actions with 0.9.
pub fn two_state_prisoners_dilemma() -> Game {
    two_player(
        [
            [[(3.0, 3.0), (0.0, 10.0)], [(10.0, 0.0), (2.0, 2.0)]],
            [[(4.0, 4.0), (0.0, 10.0)], [(10.0, 0.0), (1.0, 1.0)]],
        ],
        |s, a1, a2, s2| {
            let switch = if a1 == a2 { 0.1 } else { 0.9 };
            if s == s2 { 1.0 - switch } else { switch }
        },
    )
}

pub fn load_game(path: impl AsRef<Path>) -> Result<Game> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let value = serde_json::from_str(&text)?;
    Game::from_json(value).map_err(|e| match e {
        Error::InvalidGame(msg) => Error::InvalidGame(format!("{}: {msg}", path.display())),
        other => other,
    })
}
