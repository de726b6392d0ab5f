//! Deterministic synchronous round executor.
//!
//! Each round, every undecided vertex reads the messages its neighbors sent
//! in the previous round (port-indexed), computes, and writes port-indexed
//! messages for the next round. The reference execution is a single loop
//! with a barrier between rounds; identical inputs give bit-identical
//! verdicts and metrics.
//!
//! Resource accounting follows one convention throughout: "no message" on a
//! port costs 0 bits, an empty-content frame costs 1 bit, anything else
//! costs its length. Labels are exchanged by an explicit round-1 emission
//! of the programs, so the label exchange is metered like any other
//! message.

use thiserror::Error;

use crate::bits::Bits;
use crate::graph::GraphConfig;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("round {round}: vertex {vertex} sent on nonexistent port {port}")]
    InvalidPort {
        vertex: usize,
        port: usize,
        round: u64,
    },
    #[error("round {round}: vertex {vertex} sent a message after deciding")]
    MessageAfterDecision { vertex: usize, round: u64 },
    #[error("labels cover {got} vertices, graph has {want}")]
    LabelMismatch { got: usize, want: usize },
    #[error("round budget must be at least 1")]
    ZeroBudget,
    #[error("oracle period must be at least 1")]
    BadOracle,
}

/// Truthful round information available to every vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundOracle {
    /// No timing information; the scheme must self-synchronize.
    None,
    /// Every vertex knows the exact value of t.
    ExactT(u64),
    /// Vertices receive an alarm whenever a multiple of t rounds elapsed,
    /// without being told t itself.
    AlarmEveryT(u64),
}

impl RoundOracle {
    fn period(&self) -> Option<u64> {
        match *self {
            RoundOracle::None => None,
            RoundOracle::ExactT(t) | RoundOracle::AlarmEveryT(t) => Some(t),
        }
    }

    /// The numeric t, where the mode discloses it.
    pub fn exact_t(&self) -> Option<u64> {
        match *self {
            RoundOracle::ExactT(t) => Some(t),
            _ => None,
        }
    }
}

/// Per-round timing input to a vertex step.
#[derive(Debug, Clone, Copy)]
pub struct OracleTick {
    pub round: u64,
    /// True when the oracle period divides the current round.
    pub alarm: bool,
}

/// What a vertex decides at the end of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Accept,
    Reject,
}

/// Everything a vertex sees at initialization.
pub struct InitCtx<'a> {
    pub state: &'a Bits,
    pub label: &'a Bits,
    pub degree: usize,
    pub oracle: RoundOracle,
}

/// Port-indexed outgoing messages for one round.
#[derive(Debug, Clone)]
pub struct Outbox {
    msgs: Vec<Option<Bits>>,
}

impl Outbox {
    fn new(degree: usize) -> Self {
        Outbox {
            msgs: vec![None; degree],
        }
    }

    fn reset(&mut self, degree: usize) {
        self.msgs.clear();
        self.msgs.resize(degree, None);
    }

    pub fn send(&mut self, port: usize, msg: Bits) {
        self.msgs[port] = Some(msg);
    }

    pub fn degree(&self) -> usize {
        self.msgs.len()
    }

    pub fn broadcast(&mut self, msg: &Bits) {
        for slot in &mut self.msgs {
            *slot = Some(msg.clone());
        }
    }
}

/// Persistent local state must report its serialized size so the engine can
/// meter peak per-vertex space.
pub trait StateBits {
    fn state_bits(&self) -> usize;
}

/// A per-vertex round algorithm: a pure function of its label, state,
/// degree, oracle ticks and inbox history. Once a vertex decides, the
/// engine freezes it; it relays nothing further.
pub trait VertexProgram {
    type LocalState: StateBits;

    fn init(&self, ctx: &InitCtx) -> Self::LocalState;

    /// `inbox[p]` holds the message the neighbor on port p sent last round.
    fn step(
        &self,
        state: &mut Self::LocalState,
        inbox: &[Option<Bits>],
        tick: OracleTick,
        out: &mut Outbox,
    ) -> Decision;

    /// Whether the program requires a truthful round oracle to run.
    fn needs_oracle(&self) -> bool {
        false
    }
}

/// Resource metering over one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunMetrics {
    pub rounds: u64,
    pub max_label_bits: usize,
    /// Largest single message over the run (per edge per round).
    pub max_msg_bits: usize,
    pub total_comm_bits: u64,
    /// Peak serialized persistent local state across vertices and rounds.
    pub max_state_bits: usize,
    /// Set when the round budget ran out before every vertex decided.
    pub timed_out: bool,
}

impl RunMetrics {
    /// CSV row matching the pinned header
    /// "scheme,n,t,rounds,accepted,max_label_bits,max_msg_bits,max_state_bits,total_comm_bits".
    pub fn csv_row(&self, scheme: &str, n: usize, t: u64, accepted: bool) -> String {
        format!(
            "{scheme},{n},{t},{},{},{},{},{},{}",
            self.rounds,
            accepted,
            self.max_label_bits,
            self.max_msg_bits,
            self.max_state_bits,
            self.total_comm_bits
        )
    }
}

pub const METRICS_CSV_HEADER: &str =
    "scheme,n,t,rounds,accepted,max_label_bits,max_msg_bits,max_state_bits,total_comm_bits";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub accepted: bool,
    pub per_vertex: Vec<bool>,
}

/// Decision states of all vertices after each round, for trace-based tests
/// and the indistinguishability demonstration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTrace {
    pub round: u64,
    /// None = still running at the end of this round.
    pub decisions: Vec<Option<bool>>,
    /// Message bits emitted this round (independent accounting input).
    pub message_bits: u64,
}

fn message_cost(msg: &Bits) -> u64 {
    msg.len().max(1) as u64
}

pub fn run<P: VertexProgram>(
    g: &GraphConfig,
    labels: &[Bits],
    program: &P,
    oracle: RoundOracle,
    round_budget: u64,
) -> Result<(Verdict, RunMetrics), EngineError> {
    run_inner(g, labels, program, oracle, round_budget, None)
}

/// Like `run`, additionally returning the per-round decision trace.
pub fn run_traced<P: VertexProgram>(
    g: &GraphConfig,
    labels: &[Bits],
    program: &P,
    oracle: RoundOracle,
    round_budget: u64,
) -> Result<(Verdict, RunMetrics, Vec<RoundTrace>), EngineError> {
    let mut traces = Vec::new();
    let (verdict, metrics) = run_inner(g, labels, program, oracle, round_budget, Some(&mut traces))?;
    Ok((verdict, metrics, traces))
}

fn run_inner<P: VertexProgram>(
    g: &GraphConfig,
    labels: &[Bits],
    program: &P,
    oracle: RoundOracle,
    round_budget: u64,
    mut traces: Option<&mut Vec<RoundTrace>>,
) -> Result<(Verdict, RunMetrics), EngineError> {
    let n = g.n();
    if labels.len() != n {
        return Err(EngineError::LabelMismatch {
            got: labels.len(),
            want: n,
        });
    }
    if round_budget == 0 {
        return Err(EngineError::ZeroBudget);
    }
    if oracle.period() == Some(0) {
        return Err(EngineError::BadOracle);
    }

    // Reverse port map: message sent on v's port p lands on rev_port[v][p]
    // of the neighbor.
    let rev_port: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            g.neighbors(v)
                .iter()
                .map(|&u| g.port_of(u, v).expect("adjacency is symmetric"))
                .collect()
        })
        .collect();

    let mut states: Vec<P::LocalState> = (0..n)
        .map(|v| {
            program.init(&InitCtx {
                state: g.state(v),
                label: &labels[v],
                degree: g.degree(v),
                oracle,
            })
        })
        .collect();

    let mut metrics = RunMetrics {
        max_label_bits: labels.iter().map(Bits::len).max().unwrap_or(0),
        max_state_bits: states.iter().map(StateBits::state_bits).max().unwrap_or(0),
        ..RunMetrics::default()
    };

    let mut decided: Vec<Option<bool>> = vec![None; n];
    let fresh: Vec<Vec<Option<Bits>>> = (0..n).map(|v| vec![None; g.degree(v)]).collect();
    let mut inboxes = fresh.clone();
    let mut next_inboxes = fresh;
    let mut undecided = n;
    let mut out = Outbox::new(0);

    for round in 1..=round_budget {
        metrics.rounds = round;
        let tick = OracleTick {
            round,
            alarm: oracle.period().is_some_and(|t| round % t == 0),
        };
        let mut round_bits = 0u64;
        for v in 0..n {
            if decided[v].is_some() {
                for slot in &mut inboxes[v] {
                    *slot = None;
                }
                continue;
            }
            out.reset(g.degree(v));
            let decision = program.step(&mut states[v], &inboxes[v], tick, &mut out);
            for (port, slot) in out.msgs.iter_mut().enumerate() {
                if let Some(msg) = slot.take() {
                    if port >= g.degree(v) {
                        return Err(EngineError::InvalidPort {
                            vertex: v,
                            port,
                            round,
                        });
                    }
                    let cost = message_cost(&msg);
                    round_bits += cost;
                    metrics.max_msg_bits = metrics.max_msg_bits.max(msg.len().max(1));
                    let u = g.neighbors(v)[port];
                    next_inboxes[u][rev_port[v][port]] = Some(msg);
                }
            }
            for slot in &mut inboxes[v] {
                *slot = None;
            }
            metrics.max_state_bits = metrics.max_state_bits.max(states[v].state_bits());
            match decision {
                Decision::Continue => {}
                Decision::Accept => {
                    decided[v] = Some(true);
                    undecided -= 1;
                }
                Decision::Reject => {
                    decided[v] = Some(false);
                    undecided -= 1;
                }
            }
        }
        metrics.total_comm_bits += round_bits;
        if let Some(traces) = traces.as_deref_mut() {
            traces.push(RoundTrace {
                round,
                decisions: decided.clone(),
                message_bits: round_bits,
            });
        }
        std::mem::swap(&mut inboxes, &mut next_inboxes);
        if undecided == 0 {
            break;
        }
    }

    metrics.timed_out = undecided > 0;
    let per_vertex: Vec<bool> = decided.iter().map(|d| d.unwrap_or(false)).collect();
    let accepted = per_vertex.iter().all(|&b| b) && !metrics.timed_out;
    Ok((Verdict { accepted, per_vertex }, metrics))
}

pub use crate::graph::permute_ids;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};

    /// Decides immediately.
    struct InstantAccept;
    struct Unit;
    impl StateBits for Unit {
        fn state_bits(&self) -> usize {
            0
        }
    }
    impl VertexProgram for InstantAccept {
        type LocalState = Unit;
        fn init(&self, _: &InitCtx) -> Unit {
            Unit
        }
        fn step(
            &self,
            _: &mut Unit,
            _: &[Option<Bits>],
            _: OracleTick,
            _: &mut Outbox,
        ) -> Decision {
            Decision::Accept
        }
    }

    #[test]
    fn degenerate_single_vertex_run() {
        let g = generate(GraphKind::Path, 1, 0).unwrap();
        let labels = vec![Bits::new()];
        let (verdict, metrics) =
            run(&g, &labels, &InstantAccept, RoundOracle::None, 10).unwrap();
        assert!(verdict.accepted);
        assert_eq!(metrics.rounds, 1);
        assert!(!metrics.timed_out);
    }

    /// Floods a 1-bit token along the graph; a vertex forwards the token
    /// once and accepts as soon as it holds it.
    struct Flood;
    struct FloodState {
        has: bool,
    }
    impl StateBits for FloodState {
        fn state_bits(&self) -> usize {
            1
        }
    }
    impl VertexProgram for Flood {
        type LocalState = FloodState;
        fn init(&self, ctx: &InitCtx) -> FloodState {
            FloodState {
                has: ctx.state.len() == 1 && ctx.state.get(0),
            }
        }
        fn step(
            &self,
            st: &mut FloodState,
            inbox: &[Option<Bits>],
            _tick: OracleTick,
            out: &mut Outbox,
        ) -> Decision {
            st.has |= inbox.iter().any(Option::is_some);
            if st.has {
                out.broadcast(&Bits::from_u64(1, 1));
                Decision::Accept
            } else {
                Decision::Continue
            }
        }
    }

    #[test]
    fn flooding_on_path_of_8() {
        // Hand simulation: the token starts at vertex 0, vertex k first
        // holds it in round k+1, so the far endpoint (and the run) finishes
        // in round 8 with 1-bit messages throughout.
        let mut g = generate(GraphKind::Path, 8, 0).unwrap();
        g.set_state(0, Bits::from_u64(1, 1));
        let labels = vec![Bits::new(); 8];
        let (verdict, metrics) = run(&g, &labels, &Flood, RoundOracle::None, 100).unwrap();
        assert!(verdict.accepted);
        assert_eq!(metrics.rounds, 8);
        assert_eq!(metrics.max_msg_bits, 1);
    }

    #[test]
    fn timeout_is_reject() {
        struct Never;
        impl VertexProgram for Never {
            type LocalState = Unit;
            fn init(&self, _: &InitCtx) -> Unit {
                Unit
            }
            fn step(
                &self,
                _: &mut Unit,
                _: &[Option<Bits>],
                _: OracleTick,
                _: &mut Outbox,
            ) -> Decision {
                Decision::Continue
            }
        }
        let g = generate(GraphKind::Path, 3, 0).unwrap();
        let labels = vec![Bits::new(); 3];
        let (verdict, metrics) = run(&g, &labels, &Never, RoundOracle::None, 5).unwrap();
        assert!(!verdict.accepted);
        assert!(metrics.timed_out);
        assert_eq!(metrics.rounds, 5);
    }

    #[test]
    fn synchrony_delivers_next_round_only() {
        // Vertex 0 sends exactly in round 1; vertex 1 must see it in round
        // 2 and in no other round.
        struct Probe;
        struct ProbeState {
            is_sender: bool,
            seen_rounds: Vec<u64>,
        }
        impl StateBits for ProbeState {
            fn state_bits(&self) -> usize {
                8
            }
        }
        impl VertexProgram for Probe {
            type LocalState = ProbeState;
            fn init(&self, ctx: &InitCtx) -> ProbeState {
                ProbeState {
                    is_sender: ctx.state.len() == 1,
                    seen_rounds: Vec::new(),
                }
            }
            fn step(
                &self,
                st: &mut ProbeState,
                inbox: &[Option<Bits>],
                tick: OracleTick,
                out: &mut Outbox,
            ) -> Decision {
                if inbox.iter().any(Option::is_some) {
                    st.seen_rounds.push(tick.round);
                }
                if st.is_sender && tick.round == 1 {
                    out.send(0, Bits::from_u64(1, 1));
                }
                if tick.round == 4 {
                    if st.is_sender || st.seen_rounds == vec![2] {
                        Decision::Accept
                    } else {
                        Decision::Reject
                    }
                } else {
                    Decision::Continue
                }
            }
        }
        let mut g = generate(GraphKind::Path, 2, 0).unwrap();
        g.set_state(0, Bits::from_u64(1, 1));
        let labels = vec![Bits::new(); 2];
        let (verdict, _) = run(&g, &labels, &Probe, RoundOracle::None, 10).unwrap();
        assert!(verdict.accepted);
    }

    #[test]
    fn empty_frame_costs_one_bit() {
        struct EmptySender;
        impl VertexProgram for EmptySender {
            type LocalState = Unit;
            fn init(&self, _: &InitCtx) -> Unit {
                Unit
            }
            fn step(
                &self,
                _: &mut Unit,
                _: &[Option<Bits>],
                tick: OracleTick,
                out: &mut Outbox,
            ) -> Decision {
                if tick.round == 1 {
                    out.send(0, Bits::new());
                    Decision::Continue
                } else {
                    Decision::Accept
                }
            }
        }
        let g = generate(GraphKind::Path, 2, 0).unwrap();
        let labels = vec![Bits::new(); 2];
        let (_, metrics) = run(&g, &labels, &EmptySender, RoundOracle::None, 10).unwrap();
        assert_eq!(metrics.max_msg_bits, 1);
        assert_eq!(metrics.total_comm_bits, 2);
    }
}
