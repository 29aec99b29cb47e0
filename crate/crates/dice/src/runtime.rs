//! The actor-learner runtime: parameter server, trajectory queue, actor and
//! learner loops, evaluation, and the training driver.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::thread;
use std::time::Instant;

use dice_core::bandit::{BanditEnsemble, EnsembleConfig};
use dice_core::learner::{learner_step, AgentParams, RunConfig};
use dice_core::mdp::{argmax, sample_episode, TabularMdp};
use dice_core::policy::{boltzmann_policy, entropy, PolicyDistribution, Temperature};
use dice_core::stats;
use dice_core::traces::Trajectory;
use dice_core::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Holds the most recently published parameters.
///
/// Readers get an `Arc` to an immutable snapshot, so a copy is never torn.
#[derive(Debug)]
pub struct ParameterServer {
    current: RwLock<Arc<AgentParams>>,
}

impl ParameterServer {
    pub fn new(initial: AgentParams) -> Self {
        Self { current: RwLock::new(Arc::new(initial)) }
    }

    /// Replaces the published parameters. Versions must increase.
    pub fn publish(&self, params: AgentParams) -> Result<()> {
        let mut slot = self.current.write().unwrap_or_else(|e| e.into_inner());
        if params.version <= slot.version {
            return Err(Error::InvalidArgument(format!(
                "published version {} does not exceed {}",
                params.version, slot.version
            )));
        }
        *slot = Arc::new(params);
        Ok(())
    }

    pub fn snapshot(&self) -> Arc<AgentParams> {
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn version(&self) -> u64 {
        self.snapshot().version
    }
}

#[derive(Debug)]
struct QueueState {
    /// Trajectories with the number of batches they have been used in.
    items: VecDeque<(Arc<Trajectory>, usize)>,
    closed: bool,
    submitted: u64,
    /// Trajectories that reached their reuse count.
    retired: u64,
}

/// Bounded FIFO between actors and the learner.
///
/// A batch takes the oldest trajectories; each goes to the back of the queue
/// until it has been in `sample_reuse` batches. `submit` blocks while the
/// queue holds `capacity` trajectories.
#[derive(Debug)]
pub struct DataCollector {
    state: Mutex<QueueState>,
    not_full: Condvar,
    not_empty: Condvar,
    capacity: usize,
    sample_reuse: usize,
}

impl DataCollector {
    pub fn new(capacity: usize, sample_reuse: usize) -> Result<Self> {
        if capacity == 0 || sample_reuse == 0 {
            return Err(Error::InvalidArgument("queue capacity and sample reuse must be positive".into()));
        }
        Ok(Self {
            state: Mutex::new(QueueState { items: VecDeque::new(), closed: false, submitted: 0, retired: 0 }),
            not_full: Condvar::new(),
            not_empty: Condvar::new(),
            capacity,
            sample_reuse,
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, QueueState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Blocks while full. Returns `false` (dropping the trajectory) once the
    /// queue is closed.
    pub fn submit(&self, traj: Trajectory) -> bool {
        let mut st = self.lock();
        while st.items.len() >= self.capacity && !st.closed {
            st = self.not_full.wait(st).unwrap_or_else(|e| e.into_inner());
        }
        if st.closed {
            return false;
        }
        st.items.push_back((Arc::new(traj), 0));
        st.submitted += 1;
        self.not_empty.notify_all();
        true
    }

    /// Non-blocking submit; `Err` returns the trajectory when full or closed.
    pub fn try_submit(&self, traj: Trajectory) -> std::result::Result<(), Trajectory> {
        let mut st = self.lock();
        if st.closed || st.items.len() >= self.capacity {
            return Err(traj);
        }
        st.items.push_back((Arc::new(traj), 0));
        st.submitted += 1;
        self.not_empty.notify_all();
        Ok(())
    }

    /// Blocks until `n` trajectories are queued and takes them. Returns
    /// `None` once the queue is closed with fewer than `n` left.
    pub fn next_batch(&self, n: usize) -> Option<Vec<Arc<Trajectory>>> {
        let mut st = self.lock();
        while st.items.len() < n && !st.closed {
            st = self.not_empty.wait(st).unwrap_or_else(|e| e.into_inner());
        }
        self.take(&mut st, n)
    }

    /// Takes a batch only if `n` trajectories are already queued.
    pub fn try_next_batch(&self, n: usize) -> Option<Vec<Arc<Trajectory>>> {
        let mut st = self.lock();
        self.take(&mut st, n)
    }

    fn take(&self, st: &mut QueueState, n: usize) -> Option<Vec<Arc<Trajectory>>> {
        if n == 0 || st.items.len() < n {
            return None;
        }
        let mut batch = Vec::with_capacity(n);
        let mut again = Vec::new();
        for _ in 0..n {
            let (traj, uses) = st.items.pop_front().expect("length checked");
            batch.push(Arc::clone(&traj));
            if uses + 1 < self.sample_reuse {
                again.push((traj, uses + 1));
            } else {
                st.retired += 1;
            }
        }
        st.items.extend(again);
        self.not_full.notify_all();
        Some(batch)
    }

    /// Wakes every waiter; later submits are dropped and batches are served
    /// only while enough trajectories remain.
    pub fn close(&self) {
        let mut st = self.lock();
        st.closed = true;
        self.not_full.notify_all();
        self.not_empty.notify_all();
    }

    pub fn len(&self) -> usize {
        self.lock().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(submitted, retired)` trajectory counts.
    pub fn counts(&self) -> (u64, u64) {
        let st = self.lock();
        (st.submitted, st.retired)
    }
}

/// How actors pick an episode's temperature.
#[derive(Debug, Clone)]
pub enum TemperatureSource {
    /// Proposals from the shared ensemble, which learns from episode returns.
    Bandit(Arc<Mutex<BanditEnsemble>>),
    /// Proposals from an ensemble that is never updated.
    Fixed(Arc<BanditEnsemble>),
    /// The same temperature every episode.
    Constant(Temperature),
}

impl TemperatureSource {
    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Temperature> {
        match self {
            Self::Bandit(e) => e.lock().unwrap_or_else(|e| e.into_inner()).propose(rng),
            Self::Fixed(e) => e.propose(rng),
            Self::Constant(t) => Ok(*t),
        }
    }

    /// Reports an episode's shaped return to a learning source.
    pub fn observe(&self, tau: Temperature, g: f64) -> Result<()> {
        match self {
            Self::Bandit(e) => e.lock().unwrap_or_else(|e| e.into_inner()).update(tau, g),
            _ => Ok(()),
        }
    }

    pub fn ensemble(&self) -> Option<BanditEnsemble> {
        match self {
            Self::Bandit(e) => Some(e.lock().unwrap_or_else(|e| e.into_inner()).clone()),
            _ => None,
        }
    }
}

/// One actor's local state: its random stream and its copy of the
/// parameters with the number of environment steps since it was pulled.
#[derive(Debug)]
pub struct Actor {
    pub rng: ChaCha8Rng,
    params: Arc<AgentParams>,
    steps_since_pull: u64,
}

/// An emitted episode with the mean behavior entropy over its steps.
#[derive(Debug, Clone)]
pub struct Episode {
    pub trajectory: Trajectory,
    pub mean_entropy: f64,
}

impl Actor {
    pub fn new(rng: ChaCha8Rng, server: &ParameterServer) -> Self {
        Self { rng, params: server.snapshot(), steps_since_pull: 0 }
    }

    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    /// Plays one episode of at most `max_steps` steps: draws the episode
    /// temperature, acts with `softmax(A(s) / tau)` (pulling parameters every
    /// `d_pull` steps), and reports the shaped return to the source.
    pub fn run_episode(
        &mut self,
        env: &TabularMdp,
        server: &ParameterServer,
        source: &TemperatureSource,
        d_pull: u64,
        max_steps: usize,
    ) -> Result<Episode> {
        let tau = source.propose(&mut self.rng)?;
        let mut entropy_sum = 0.0;
        let mut params = Arc::clone(&self.params);
        let mut since = self.steps_since_pull;
        let mut behavior = |s: usize| {
            if since >= d_pull {
                params = server.snapshot();
                since = 0;
            }
            since += 1;
            let dist = boltzmann_policy(params.a.row(s), tau).expect("finite parameters");
            entropy_sum += entropy(&dist);
            dist
        };
        let mut traj = sample_episode(env, &mut behavior, Some(tau), &mut self.rng, max_steps)?;
        self.params = params;
        self.steps_since_pull = since;
        traj.params_version = self.params.version;
        source.observe(tau, traj.episode_return)?;
        let mean_entropy = entropy_sum / traj.len() as f64;
        Ok(Episode { trajectory: traj, mean_entropy })
    }
}

/// One evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    /// The evaluation boundary passed: a multiple of `eval_interval`, or the
    /// final step count.
    pub step: u64,
    pub learner_steps: u64,
    /// Raw (unshaped) returns of the greedy policy.
    pub mean_return: f64,
    pub median_return: f64,
    pub mean_shaped_return: f64,
    pub median_shaped_return: f64,
    /// Mean behavior entropy over the steps collected since the previous
    /// point; `None` if no episode finished in between.
    pub entropy: Option<f64>,
    /// Percentiles of the episode temperatures since the previous point.
    pub tau_p10: Option<f64>,
    pub tau_p50: Option<f64>,
    pub tau_p90: Option<f64>,
    /// Mean raw return when acting at the ensemble's best temperature.
    pub best_tau_return: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub points: Vec<EvalPoint>,
    pub env_steps: u64,
    pub learner_steps: u64,
    pub episodes: u64,
    /// Measured only in threaded runs; synchronous runs leave it empty so
    /// that their reports are reproducible.
    pub wall_clock_secs: Option<f64>,
    pub final_params: AgentParams,
    pub final_ensemble: Option<BanditEnsemble>,
}

impl TrainingReport {
    pub fn final_point(&self) -> &EvalPoint {
        self.points.last().expect("reports hold at least the initial evaluation")
    }
}

/// Saved training state for a synchronous run to resume from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingState {
    pub params: AgentParams,
    pub ensemble: Option<BanditEnsemble>,
    pub rng: ChaCha8Rng,
    pub env_steps: u64,
    pub learner_steps: u64,
    pub episodes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Actors and learner interleave on one thread with one random stream.
    Synchronous,
    /// One thread per actor plus the learner.
    Threaded,
}

/// Greedy-policy returns: `(raw, shaped)` per episode.
fn rollout_returns<F>(env: &TabularMdp, mut behavior: F, episodes: usize, max_steps: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(usize) -> PolicyDistribution,
{
    let mut raw = Vec::with_capacity(episodes);
    let mut shaped = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let t = sample_episode(env, &mut behavior, None, rng, max_steps)?;
        raw.push(t.raw_return);
        shaped.push(t.episode_return);
    }
    Ok((raw, shaped))
}

/// Raw returns of the policy `argmax_a A(s, a)`.
pub fn greedy_returns(env: &TabularMdp, params: &AgentParams, episodes: usize, max_steps: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let na = params.n_actions();
    rollout_returns(
        env,
        |s| PolicyDistribution::one_hot(na, argmax(params.a.row(s))).expect("index in range"),
        episodes,
        max_steps,
        &mut rng,
    )
}

/// Raw returns of `softmax(A / tau)`.
pub fn boltzmann_returns(
    env: &TabularMdp,
    params: &AgentParams,
    tau: Temperature,
    episodes: usize,
    max_steps: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rollout_returns(env, |s| boltzmann_policy(params.a.row(s), tau).expect("finite"), episodes, max_steps, &mut rng)
}

/// Evaluation streams are independent of the training stream.
fn eval_seed(run_seed: u64, index: usize) -> u64 {
    run_seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index as u64 + 1)
}

#[derive(Debug, Default)]
struct Window {
    taus: Vec<f64>,
    entropy_sum: f64,
    entropy_steps: f64,
}

impl Window {
    fn record(&mut self, ep: &Episode) {
        if let Some(t) = ep.trajectory.temperature {
            self.taus.push(t.get());
        }
        let n = ep.trajectory.len() as f64;
        self.entropy_sum += ep.mean_entropy * n;
        self.entropy_steps += n;
    }
}

struct Evaluator<'a> {
    env: &'a TabularMdp,
    cfg: &'a RunConfig,
    points: Vec<EvalPoint>,
}

impl Evaluator<'_> {
    fn evaluate(
        &mut self,
        params: &AgentParams,
        ensemble: Option<&BanditEnsemble>,
        step: u64,
        learner_steps: u64,
        window: &mut Window,
    ) -> Result<()> {
        let index = self.points.len();
        let seed = eval_seed(self.cfg.seed, index);
        let (raw, shaped) = greedy_returns(self.env, params, self.cfg.eval_episodes, self.cfg.max_episode_steps, seed)?;
        let best_tau_return = match ensemble {
            Some(e) => {
                let tau = e.best_temperature()?;
                let (raw, _) = boltzmann_returns(self.env, params, tau, self.cfg.eval_episodes, self.cfg.max_episode_steps, seed ^ 1)?;
                stats::mean(&raw)
            }
            None => None,
        };
        let q = |p| stats::quantile(&window.taus, p);
        self.points.push(EvalPoint {
            step,
            learner_steps,
            mean_return: stats::mean(&raw).unwrap_or(0.0),
            median_return: stats::median(&raw).unwrap_or(0.0),
            mean_shaped_return: stats::mean(&shaped).unwrap_or(0.0),
            median_shaped_return: stats::median(&shaped).unwrap_or(0.0),
            entropy: (window.entropy_steps > 0.0).then(|| window.entropy_sum / window.entropy_steps),
            tau_p10: q(0.1),
            tau_p50: q(0.5),
            tau_p90: q(0.9),
            best_tau_return,
        });
        *window = Window::default();
        Ok(())
    }
}

fn temperature_source(cfg: &RunConfig, rng: &mut ChaCha8Rng, resume: Option<&BanditEnsemble>) -> Result<TemperatureSource> {
    let ens_cfg = EnsembleConfig {
        members: cfg.bandit_members,
        d: cfg.bandit_candidates,
        ucb_scale: cfg.ucb_scale,
        ..EnsembleConfig::default()
    };
    if cfg.ablations.baseline {
        return Ok(TemperatureSource::Constant(Temperature::ONE));
    }
    let fresh = match resume {
        Some(e) => e.clone(),
        None => BanditEnsemble::new(&ens_cfg, rng)?,
    };
    Ok(if cfg.ablations.no_bva {
        TemperatureSource::Fixed(Arc::new(fresh))
    } else {
        TemperatureSource::Bandit(Arc::new(Mutex::new(fresh)))
    })
}

/// Trains on `env` with `cfg` and reports periodic greedy evaluations.
pub fn run_training(env: &TabularMdp, cfg: &RunConfig, schedule: Schedule) -> Result<TrainingReport> {
    run_with_state(env, cfg, schedule).map(|(r, _)| r)
}

/// [`run_training`] that also returns the final state for checkpointing.
/// The state of a threaded run carries the learner's random stream.
pub fn run_with_state(env: &TabularMdp, cfg: &RunConfig, schedule: Schedule) -> Result<(TrainingReport, TrainingState)> {
    match schedule {
        Schedule::Synchronous => run_synchronous(env, cfg, None),
        Schedule::Threaded => run_threaded(env, cfg),
    }
}

fn saved_ensemble(source: &TemperatureSource) -> Option<BanditEnsemble> {
    match source {
        TemperatureSource::Bandit(_) => source.ensemble(),
        TemperatureSource::Fixed(e) => Some((**e).clone()),
        TemperatureSource::Constant(_) => None,
    }
}

fn check_setup(env: &TabularMdp, cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.queue_capacity < cfg.batch_size {
        return Err(Error::InvalidConfig("queue_capacity must be at least batch_size".into()));
    }
    if env.n_states() == 0 {
        return Err(Error::InvalidConfig("environment has no states".into()));
    }
    Ok(())
}

/// Deterministic schedule: actors take turns playing one episode each; after
/// every episode the learner takes every full batch that is available, and
/// evaluations run whenever the step counter passes an evaluation boundary.
/// Returns the report and the state to resume from.
pub fn run_synchronous(env: &TabularMdp, cfg: &RunConfig, resume: Option<TrainingState>) -> Result<(TrainingReport, TrainingState)> {
    check_setup(env, cfg)?;
    let (mut rng, mut params, resumed_ensemble, mut env_steps, mut learner_steps, mut episodes) = match resume {
        Some(st) => (st.rng, st.params, st.ensemble, st.env_steps, st.learner_steps, st.episodes),
        None => (ChaCha8Rng::seed_from_u64(cfg.seed), AgentParams::zeros(env.n_states(), env.n_actions()), None, 0, 0, 0),
    };
    if params.n_states() != env.n_states() || params.n_actions() != env.n_actions() {
        return Err(Error::InvalidConfig("saved parameters do not match the environment".into()));
    }
    let source = temperature_source(cfg, &mut rng, resumed_ensemble.as_ref())?;
    let server = ParameterServer::new(params.clone());
    let collector = DataCollector::new(cfg.queue_capacity, cfg.sample_reuse)?;
    // Actors share the run's single stream; each keeps its own parameter copy.
    let mut actors: Vec<(Arc<AgentParams>, u64)> = (0..cfg.num_actors).map(|_| (server.snapshot(), 0)).collect();
    let mut eval = Evaluator { env, cfg, points: Vec::new() };
    let mut window = Window::default();
    let ensemble_view = |s: &TemperatureSource| s.ensemble();

    eval.evaluate(&params, ensemble_view(&source).as_ref(), env_steps, learner_steps, &mut window)?;
    let mut next_eval = env_steps + cfg.eval_interval;
    let mut turn = 0usize;
    while env_steps < cfg.total_steps {
        let remaining = (cfg.total_steps - env_steps) as usize;
        let (actor_params, since) = &mut actors[turn % cfg.num_actors];
        let mut actor = Actor { rng, params: Arc::clone(actor_params), steps_since_pull: *since };
        let ep = actor.run_episode(env, &server, &source, cfg.d_pull, cfg.max_episode_steps.min(remaining))?;
        rng = actor.rng;
        *actor_params = actor.params;
        *since = actor.steps_since_pull;
        turn += 1;
        env_steps += ep.trajectory.len() as u64;
        episodes += 1;
        window.record(&ep);
        if collector.try_submit(ep.trajectory).is_err() {
            return Err(Error::InvalidConfig("trajectory queue overflowed in synchronous mode".into()));
        }
        while let Some(batch) = collector.try_next_batch(cfg.batch_size) {
            let batch: Vec<Trajectory> = batch.iter().map(|t| (**t).clone()).collect();
            params = learner_step(&params, &batch, cfg, &mut rng)?;
            learner_steps += 1;
            if learner_steps.is_multiple_of(cfg.d_push) {
                server.publish(params.clone())?;
            }
        }
        while env_steps >= next_eval {
            eval.evaluate(&params, ensemble_view(&source).as_ref(), next_eval, learner_steps, &mut window)?;
            next_eval += cfg.eval_interval;
        }
    }
    if eval.points.last().is_some_and(|p| p.step != env_steps) {
        eval.evaluate(&params, ensemble_view(&source).as_ref(), env_steps, learner_steps, &mut window)?;
    }
    let final_ensemble = source.ensemble();
    let state = TrainingState {
        params: params.clone(),
        ensemble: saved_ensemble(&source),
        rng,
        env_steps,
        learner_steps,
        episodes,
    };
    let report = TrainingReport {
        points: eval.points,
        env_steps,
        learner_steps,
        episodes,
        wall_clock_secs: None,
        final_params: params,
        final_ensemble,
    };
    Ok((report, state))
}

/// Threaded schedule: `num_actors` actor threads feed the queue while the
/// calling thread runs the learner.
fn run_threaded(env: &TabularMdp, cfg: &RunConfig) -> Result<(TrainingReport, TrainingState)> {
    check_setup(env, cfg)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let source = temperature_source(cfg, &mut rng, None)?;
    let mut params = AgentParams::zeros(env.n_states(), env.n_actions());
    let server = ParameterServer::new(params.clone());
    let collector = DataCollector::new(cfg.queue_capacity, cfg.sample_reuse)?;
    let env_steps = AtomicU64::new(0);
    let episodes = AtomicU64::new(0);
    let active = AtomicUsize::new(cfg.num_actors);
    let failed = AtomicBool::new(false);
    let window = Mutex::new(Window::default());
    let mut eval = Evaluator { env, cfg, points: Vec::new() };
    let mut learner_steps = 0u64;

    eval.evaluate(&params, source.ensemble().as_ref(), 0, 0, &mut Window::default())?;

    let outcome: Result<()> = thread::scope(|scope| {
        let mut handles = Vec::new();
        for i in 0..cfg.num_actors {
            let mut actor_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            actor_rng.set_stream(i as u64 + 1);
            let (server, collector, source, env_steps, episodes, active, failed, window) =
                (&server, &collector, &source, &env_steps, &episodes, &active, &failed, &window);
            handles.push(scope.spawn(move || -> Result<()> {
                let mut actor = Actor::new(actor_rng, server);
                let result = (|| {
                    loop {
                        let used = env_steps.load(Ordering::SeqCst);
                        if used >= cfg.total_steps || failed.load(Ordering::SeqCst) {
                            return Ok(());
                        }
                        let budget = ((cfg.total_steps - used) as usize).min(cfg.max_episode_steps);
                        let ep = actor.run_episode(env, server, source, cfg.d_pull, budget)?;
                        let len = ep.trajectory.len() as u64;
                        window.lock().unwrap_or_else(|e| e.into_inner()).record(&ep);
                        if !collector.submit(ep.trajectory) {
                            return Ok(());
                        }
                        env_steps.fetch_add(len, Ordering::SeqCst);
                        episodes.fetch_add(1, Ordering::SeqCst);
                    }
                })();
                if result.is_err() {
                    failed.store(true, Ordering::SeqCst);
                }
                if active.fetch_sub(1, Ordering::SeqCst) == 1 {
                    collector.close();
                }
                if result.is_err() {
                    collector.close();
                }
                result
            }));
        }

        let mut next_eval = cfg.eval_interval;
        let mut learner_error = None;
        while let Some(batch) = collector.next_batch(cfg.batch_size) {
            let batch: Vec<Trajectory> = batch.iter().map(|t| (**t).clone()).collect();
            match learner_step(&params, &batch, cfg, &mut rng) {
                Ok(p) => params = p,
                Err(e) => {
                    learner_error = Some(e);
                    break;
                }
            }
            learner_steps += 1;
            if learner_steps.is_multiple_of(cfg.d_push) {
                server.publish(params.clone())?;
            }
            let steps = env_steps.load(Ordering::SeqCst);
            if steps >= next_eval {
                let label = steps / cfg.eval_interval * cfg.eval_interval;
                let mut w = std::mem::take(&mut *window.lock().unwrap_or_else(|e| e.into_inner()));
                eval.evaluate(&params, source.ensemble().as_ref(), label, learner_steps, &mut w)?;
                next_eval = label + cfg.eval_interval;
            }
        }
        if let Some(e) = learner_error {
            failed.store(true, Ordering::SeqCst);
            collector.close();
            for h in handles {
                let _ = h.join();
            }
            return Err(e);
        }
        for h in handles {
            h.join().map_err(|_| Error::Degenerate("actor thread panicked".into()))??;
        }
        Ok(())
    });
    outcome?;

    let steps = env_steps.load(Ordering::SeqCst);
    if eval.points.last().is_some_and(|p| p.step != steps || p.learner_steps != learner_steps) {
        let mut w = std::mem::take(&mut *window.lock().unwrap_or_else(|e| e.into_inner()));
        if eval.points.last().is_some_and(|p| p.step == steps) {
            eval.points.pop();
        }
        eval.evaluate(&params, source.ensemble().as_ref(), steps, learner_steps, &mut w)?;
    }
    let episodes = episodes.load(Ordering::SeqCst);
    let state = TrainingState {
        params: params.clone(),
        ensemble: saved_ensemble(&source),
        rng,
        env_steps: steps,
        learner_steps,
        episodes,
    };
    let report = TrainingReport {
        points: eval.points,
        env_steps: steps,
        learner_steps,
        episodes,
        wall_clock_secs: Some(start.elapsed().as_secs_f64()),
        final_params: params,
        final_ensemble: source.ensemble(),
    };
    Ok((report, state))
}
