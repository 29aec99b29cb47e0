//! Line-oriented text format for tabular MDPs.
//!
//! ```text
//! # comments and blank lines are ignored
//! states 3
//! actions 2
//! gamma 0.9
//! terminal 2              # zero or more state indices, repeatable
//! initial 1 0 0           # start distribution, one entry per state
//! transition 0 0 1 0 0    # s a, then P(s' | s, a) for every s'
//! reward 0 1 1.5          # s a r; unlisted pairs have reward 0
//! ```
//!
//! `states`, `actions`, `gamma` and `initial` are required, and every
//! non-terminal `(s, a)` needs a `transition` line. Terminal states may omit
//! theirs; they are absorbing with zero reward either way.

use std::path::Path;

use dice_core::mdp::TabularMdp;
use dice_core::table::StateActionTable;

use crate::error::{Result, Source};

pub fn parse_mdp(text: &str, name: &str) -> Result<TabularMdp> {
    let src = Source { name };
    let mut n_states: Option<usize> = None;
    let mut n_actions: Option<usize> = None;
    let mut gamma: Option<f64> = None;
    let mut terminal_idx = Vec::new();
    let mut initial: Option<Vec<f64>> = None;
    let mut transitions: Vec<(usize, usize, usize, Vec<f64>)> = Vec::new();
    let mut rewards: Vec<(usize, usize, usize, f64)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut words = content.split_whitespace();
        let key = words.next().expect("non-empty line");
        let rest: Vec<&str> = words.collect();
        let one = |what: &str| -> Result<&str> {
            match rest.as_slice() {
                [x] => Ok(x),
                _ => Err(src.err(line, format!("`{what}` takes exactly one value"))),
            }
        };
        match key {
            "states" => n_states = Some(src.num(line, "state count", one("states")?)?),
            "actions" => n_actions = Some(src.num(line, "action count", one("actions")?)?),
            "gamma" => gamma = Some(src.num(line, "discount", one("gamma")?)?),
            "terminal" => {
                for w in &rest {
                    terminal_idx.push((line, src.num::<usize>(line, "state index", w)?));
                }
            }
            "initial" => initial = Some(rest.iter().map(|w| src.num(line, "probability", w)).collect::<Result<_>>()?),
            "transition" => {
                if rest.len() < 2 {
                    return Err(src.err(line, "`transition` needs a state, an action and probabilities"));
                }
                let s = src.num(line, "state index", rest[0])?;
                let a = src.num(line, "action index", rest[1])?;
                let probs = rest[2..].iter().map(|w| src.num(line, "probability", w)).collect::<Result<_>>()?;
                transitions.push((line, s, a, probs));
            }
            "reward" => {
                if rest.len() != 3 {
                    return Err(src.err(line, "`reward` takes a state, an action and a value"));
                }
                let s = src.num(line, "state index", rest[0])?;
                let a = src.num(line, "action index", rest[1])?;
                rewards.push((line, s, a, src.num(line, "reward", rest[2])?));
            }
            other => return Err(src.err(line, format!("unknown key `{other}`"))),
        }
    }

    let ns = n_states.ok_or_else(|| src.err(0, "missing `states`"))?;
    let na = n_actions.ok_or_else(|| src.err(0, "missing `actions`"))?;
    let gamma = gamma.ok_or_else(|| src.err(0, "missing `gamma`"))?;
    let initial = initial.ok_or_else(|| src.err(0, "missing `initial`"))?;
    if ns == 0 || na == 0 {
        return Err(src.err(0, "state and action counts must be positive"));
    }
    let mut terminal = vec![false; ns];
    for (line, s) in terminal_idx {
        *terminal.get_mut(s).ok_or_else(|| src.err(line, format!("state {s} out of range")))? = true;
    }
    let mut p = vec![0.0; ns * na * ns];
    let mut seen = vec![false; ns * na];
    for (line, s, a, probs) in transitions {
        if s >= ns || a >= na {
            return Err(src.err(line, format!("pair ({s}, {a}) out of range")));
        }
        if probs.len() != ns {
            return Err(src.err(line, format!("expected {ns} probabilities, got {}", probs.len())));
        }
        if std::mem::replace(&mut seen[s * na + a], true) {
            return Err(src.err(line, format!("duplicate transition for ({s}, {a})")));
        }
        p[(s * na + a) * ns..(s * na + a + 1) * ns].copy_from_slice(&probs);
    }
    for s in 0..ns {
        for a in 0..na {
            if !seen[s * na + a] {
                if !terminal[s] {
                    return Err(src.err(0, format!("missing transition for ({s}, {a})")));
                }
                p[(s * na + a) * ns + s] = 1.0;
            }
        }
    }
    let mut r = StateActionTable::zeros(ns, na);
    for (line, s, a, value) in rewards {
        if s >= ns || a >= na {
            return Err(src.err(line, format!("pair ({s}, {a}) out of range")));
        }
        r.set(s, a, value);
    }
    Ok(TabularMdp::new(ns, na, p, r, gamma, terminal, initial)?)
}

pub fn read_mdp(path: &Path) -> Result<TabularMdp> {
    let text = std::fs::read_to_string(path)?;
    parse_mdp(&text, &path.display().to_string())
}

/// Renders `mdp` so that [`parse_mdp`] reproduces it exactly.
pub fn format_mdp(mdp: &TabularMdp) -> String {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut out = format!("states {ns}\nactions {na}\ngamma {}\n", mdp.gamma());
    let terminal: Vec<String> = (0..ns).filter(|&s| mdp.is_terminal(s)).map(|s| s.to_string()).collect();
    if !terminal.is_empty() {
        out += &format!("terminal {}\n", terminal.join(" "));
    }
    out += &format!("initial {}\n", join(mdp.initial_distribution()));
    for s in 0..ns {
        for a in 0..na {
            out += &format!("transition {s} {a} {}\n", join(mdp.transition(s, a)));
        }
    }
    for s in 0..ns {
        for a in 0..na {
            let r = mdp.reward(s, a);
            if r != 0.0 {
                out += &format!("reward {s} {a} {r}\n");
            }
        }
    }
    out
}
