//! Text checkpoints of a training state.
//!
//! ```text
//! dice-checkpoint 1
//! shape <states> <actions>
//! version <params version>
//! counters <env steps> <learner steps> <episodes>
//! a <s> <A(s, 0)> ... <A(s, n_actions - 1)>     # one line per state
//! v <V(0)> ... <V(n_states - 1)>
//! rng <seed as 64 hex digits> <stream> <word position>
//! ensemble <members> <ucb scale>                # or `ensemble none`
//! member <argmax|random> <l> <r> <acc> <width> <lr> <d>
//! w <weight per tile>
//! n <count per tile>
//! end
//! ```
//!
//! Each `member` line is followed by its `w` and `n` lines. Reals are written
//! in shortest round-trip form, so a save and load reproduces the state bit
//! for bit.

use std::fmt::Write as _;
use std::path::Path;

use dice_core::bandit::{Bandit, BanditEnsemble, BanditMode};
use dice_core::learner::AgentParams;
use dice_core::table::StateActionTable;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::error::{Result, Source};
use crate::runtime::TrainingState;

const MAGIC: &str = "dice-checkpoint 1";

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

pub fn format_checkpoint(state: &TrainingState) -> String {
    let p = &state.params;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "shape {} {}", p.n_states(), p.n_actions());
    let _ = writeln!(out, "version {}", p.version);
    let _ = writeln!(out, "counters {} {} {}", state.env_steps, state.learner_steps, state.episodes);
    for s in 0..p.n_states() {
        let _ = writeln!(out, "a {s} {}", join(p.a.row(s)));
    }
    let _ = writeln!(out, "v {}", join(&p.v));
    let seed: String = state.rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
    let _ = writeln!(out, "rng {seed} {} {}", state.rng.get_stream(), state.rng.get_word_pos());
    match &state.ensemble {
        None => {
            let _ = writeln!(out, "ensemble none");
        }
        Some(e) => {
            let _ = writeln!(out, "ensemble {} {}", e.members().len(), e.ucb_scale());
            for b in e.members() {
                let mode = match b.mode() {
                    BanditMode::Argmax => "argmax",
                    BanditMode::Random => "random",
                };
                let _ = writeln!(
                    out,
                    "member {mode} {} {} {} {} {} {}",
                    b.lower(),
                    b.upper(),
                    b.acc(),
                    b.width(),
                    b.lr(),
                    b.d()
                );
                let _ = writeln!(out, "w {}", join(b.weights()));
                let _ = writeln!(out, "n {}", join(b.counts()));
            }
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    src: Source<'a>,
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// The next line's words after checking its leading key.
    fn expect(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let (i, line) = self.inner.next().ok_or_else(|| self.src.err(self.last + 1, format!("expected `{key}`")))?;
        self.last = i + 1;
        let mut words = line.split_whitespace();
        if words.next() != Some(key) {
            return Err(self.src.err(i + 1, format!("expected `{key}`")));
        }
        Ok(words.collect())
    }

    fn nums<T: std::str::FromStr>(&self, words: &[&str], what: &str) -> Result<Vec<T>> {
        words.iter().map(|w| self.src.num(self.last, what, w)).collect()
    }

    fn count(&self, words: &[&str], n: usize) -> Result<()> {
        if words.len() != n {
            return Err(self.src.err(self.last, format!("expected {n} values, got {}", words.len())));
        }
        Ok(())
    }
}

pub fn parse_checkpoint(text: &str, name: &str) -> Result<TrainingState> {
    let mut lines = Lines { src: Source { name }, inner: text.lines().enumerate().peekable(), last: 0 };
    match lines.inner.next() {
        Some((_, l)) if l.trim() == MAGIC => lines.last = 1,
        _ => return Err(lines.src.err(1, format!("expected `{MAGIC}`"))),
    }
    let w = lines.expect("shape")?;
    lines.count(&w, 2)?;
    let shape: Vec<usize> = lines.nums(&w, "size")?;
    let (ns, na) = (shape[0], shape[1]);
    let w = lines.expect("version")?;
    lines.count(&w, 1)?;
    let version: u64 = lines.nums(&w, "version")?[0];
    let w = lines.expect("counters")?;
    lines.count(&w, 3)?;
    let counters: Vec<u64> = lines.nums(&w, "counter")?;

    let mut a = Vec::with_capacity(ns * na);
    for s in 0..ns {
        let w = lines.expect("a")?;
        lines.count(&w, na + 1)?;
        if lines.nums::<usize>(&w[..1], "state")?[0] != s {
            return Err(lines.src.err(lines.last, format!("expected the row of state {s}")));
        }
        a.extend(lines.nums::<f64>(&w[1..], "advantage")?);
    }
    let w = lines.expect("v")?;
    lines.count(&w, ns)?;
    let v: Vec<f64> = lines.nums(&w, "value")?;
    let a = StateActionTable::from_vec(ns, na, a)?;

    let w = lines.expect("rng")?;
    lines.count(&w, 3)?;
    let hex = w[0];
    if hex.len() != 64 || !hex.is_ascii() {
        return Err(lines.src.err(lines.last, "rng seed must be 64 hex digits"));
    }
    let mut seed = [0u8; 32];
    for (k, byte) in seed.iter_mut().enumerate() {
        *byte = u8::from_str_radix(&hex[2 * k..2 * k + 2], 16).map_err(|_| lines.src.err(lines.last, "bad hex in rng seed"))?;
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(lines.nums::<u64>(&w[1..2], "stream")?[0]);
    rng.set_word_pos(lines.nums::<u128>(&w[2..3], "word position")?[0]);

    let w = lines.expect("ensemble")?;
    let ensemble = if w == ["none"] {
        None
    } else {
        lines.count(&w, 2)?;
        let m: usize = lines.nums(&w[..1], "member count")?[0];
        let ucb: f64 = lines.nums(&w[1..], "ucb scale")?[0];
        let mut members = Vec::with_capacity(m);
        for _ in 0..m {
            let w = lines.expect("member")?;
            lines.count(&w, 7)?;
            let mode = match w[0] {
                "argmax" => BanditMode::Argmax,
                "random" => BanditMode::Random,
                other => return Err(lines.src.err(lines.last, format!("unknown bandit mode `{other}`"))),
            };
            let reals: Vec<f64> = lines.nums(&[w[1], w[2], w[3], w[5]], "bandit setting")?;
            let ints: Vec<usize> = lines.nums(&[w[4], w[6]], "bandit setting")?;
            let ww = lines.expect("w")?;
            let weights: Vec<f64> = lines.nums(&ww, "weight")?;
            let nn = lines.expect("n")?;
            let counts: Vec<u64> = lines.nums(&nn, "count")?;
            members.push(Bandit::from_parts(mode, reals[0], reals[1], reals[2], ints[0], reals[3], ints[1], weights, counts)?);
        }
        Some(BanditEnsemble::from_members(members, ucb)?)
    };
    lines.expect("end")?;
    if let Some((i, l)) = lines.inner.find(|(_, l)| !l.trim().is_empty()) {
        return Err(lines.src.err(i + 1, format!("unexpected content after `end`: `{l}`")));
    }
    Ok(TrainingState {
        params: AgentParams { a, v, version },
        ensemble,
        rng,
        env_steps: counters[0],
        learner_steps: counters[1],
        episodes: counters[2],
    })
}

pub fn write_checkpoint(path: &Path, state: &TrainingState) -> Result<()> {
    std::fs::write(path, format_checkpoint(state))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<TrainingState> {
    let text = std::fs::read_to_string(path)?;
    parse_checkpoint(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use dice_core::bandit::EnsembleConfig;
    use rand::Rng;

    fn sample_state(with_ensemble: bool) -> TrainingState {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut params = AgentParams::zeros(3, 2);
        for x in params.a.as_mut_slice() {
            *x = rng.random::<f64>() - 0.5;
        }
        params.v = vec![0.1, -1e-300, 123456.789];
        params.version = 42;
        let ensemble = with_ensemble.then(|| {
            let mut e = BanditEnsemble::new(&EnsembleConfig::default(), &mut rng).unwrap();
            for _ in 0..50 {
                let tau = e.propose(&mut rng).unwrap();
                e.update(tau, rng.random::<f64>()).unwrap();
            }
            e
        });
        let _ = rng.random::<u64>();
        TrainingState { params, ensemble, rng, env_steps: 1000, learner_steps: 7, episodes: 33 }
    }

    #[test]
    fn round_trip_is_exact() {
        for with in [true, false] {
            let st = sample_state(with);
            let back = parse_checkpoint(&format_checkpoint(&st), "ck").unwrap();
            assert_eq!(back, st);
        }
    }

    #[test]
    fn restored_rng_continues_the_stream() {
        let mut st = sample_state(false);
        let mut back = parse_checkpoint(&format_checkpoint(&st), "ck").unwrap();
        for _ in 0..10 {
            assert_eq!(st.rng.random::<u64>(), back.rng.random::<u64>());
        }
    }

    #[test]
    fn rejects_truncated_or_altered_files() {
        let text = format_checkpoint(&sample_state(true));
        assert!(parse_checkpoint(&text[..text.len() / 2], "ck").is_err());
        assert!(parse_checkpoint(&text.replace("dice-checkpoint 1", "dice-checkpoint 2"), "ck").is_err());
        assert!(parse_checkpoint(&text.replace("member argmax", "member greedy").replace("member random", "member greedy"), "ck").is_err());
        assert!(parse_checkpoint(&format!("{text}extra\n"), "ck").is_err());
    }
}
