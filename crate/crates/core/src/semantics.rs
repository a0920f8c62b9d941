//! Transition systems and their free trace category: states as objects,
//! finite paths as morphisms, empty paths as identities, concatenation as
//! composition. Also the BFS reachability oracle and the interpretation /
//! reification pair between closed normal trace terms and paths.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use crate::syntax::{Decl, ModuleAst, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(pub u32);

/// Index of a step in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StepId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepDef {
    pub src: StateId,
    pub event: EventId,
    pub dst: StateId,
    pub witness: String,
}

/// Finite set of states, events, and named step witnesses. Immutable after
/// validation; all queries are read-only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionSystem {
    states: Vec<String>,
    events: Vec<String>,
    steps: Vec<StepDef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SystemError {
    UnknownState(String),
    UnknownEvent(String),
    UnknownWitness(String),
    DuplicateWitness(String),
    DuplicateTriple {
        src: String,
        event: String,
        dst: String,
    },
    InvalidStateId(u32),
}

impl fmt::Display for SystemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemError::UnknownState(s) => write!(f, "unknown state `{s}`"),
            SystemError::UnknownEvent(e) => write!(f, "unknown event `{e}`"),
            SystemError::UnknownWitness(w) => write!(f, "unknown step witness `{w}`"),
            SystemError::DuplicateWitness(w) => write!(f, "duplicate step witness `{w}`"),
            SystemError::DuplicateTriple { src, event, dst } => {
                write!(f, "duplicate step triple `{src} -[{event}]-> {dst}`")
            }
            SystemError::InvalidStateId(i) => write!(f, "state id {i} out of range"),
        }
    }
}

impl std::error::Error for SystemError {}

impl TransitionSystem {
    pub fn new() -> TransitionSystem {
        TransitionSystem::default()
    }

    /// Collect the state/event/step declarations of a parsed module.
    pub fn from_module(m: &ModuleAst) -> Result<TransitionSystem, SystemError> {
        let mut ts = TransitionSystem::new();
        for (d, _) in &m.decls {
            match d {
                Decl::State(n) => ts.add_state(n.clone()),
                Decl::Event(n) => ts.add_event(n.clone()),
                Decl::Step {
                    src,
                    event,
                    dst,
                    witness,
                } => {
                    ts.add_step(src, event, dst, witness.clone())?;
                }
                _ => {}
            }
        }
        validate_system(&ts)?;
        Ok(ts)
    }

    pub fn add_state(&mut self, name: impl Into<String>) {
        self.states.push(name.into());
    }

    pub fn add_event(&mut self, name: impl Into<String>) {
        self.events.push(name.into());
    }

    pub fn add_step(
        &mut self,
        src: &str,
        event: &str,
        dst: &str,
        witness: impl Into<String>,
    ) -> Result<StepId, SystemError> {
        let src = self
            .state(src)
            .ok_or_else(|| SystemError::UnknownState(src.into()))?;
        let event_id = self
            .event(event)
            .ok_or_else(|| SystemError::UnknownEvent(event.into()))?;
        let dst = self
            .state(dst)
            .ok_or_else(|| SystemError::UnknownState(dst.into()))?;
        self.steps.push(StepDef {
            src,
            event: event_id,
            dst,
            witness: witness.into(),
        });
        Ok(StepId(self.steps.len() as u32 - 1))
    }

    pub fn state(&self, name: &str) -> Option<StateId> {
        self.states
            .iter()
            .position(|s| s == name)
            .map(|i| StateId(i as u32))
    }

    pub fn event(&self, name: &str) -> Option<EventId> {
        self.events
            .iter()
            .position(|e| e == name)
            .map(|i| EventId(i as u32))
    }

    pub fn witness(&self, name: &str) -> Option<StepId> {
        self.steps
            .iter()
            .position(|s| s.witness == name)
            .map(|i| StepId(i as u32))
    }

    pub fn state_name(&self, id: StateId) -> &str {
        &self.states[id.0 as usize]
    }

    pub fn event_name(&self, id: EventId) -> &str {
        &self.events[id.0 as usize]
    }

    pub fn step(&self, id: StepId) -> &StepDef {
        &self.steps[id.0 as usize]
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.states.len() as u32).map(StateId)
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn event_names(&self) -> &[String] {
        &self.events
    }

    pub fn steps(&self) -> &[StepDef] {
        &self.steps
    }

    pub fn step_ids(&self) -> impl Iterator<Item = StepId> + '_ {
        (0..self.steps.len() as u32).map(StepId)
    }

    fn check_state(&self, id: StateId) -> Result<(), SystemError> {
        if (id.0 as usize) < self.states.len() {
            Ok(())
        } else {
            Err(SystemError::InvalidStateId(id.0))
        }
    }
}

/// Check the structural invariants: all references declared, witness names
/// unique, no duplicate (src, event, dst) triples.
pub fn validate_system(ts: &TransitionSystem) -> Result<(), SystemError> {
    let mut witnesses = BTreeMap::new();
    let mut triples = BTreeMap::new();
    for step in ts.steps() {
        ts.check_state(step.src)?;
        ts.check_state(step.dst)?;
        if (step.event.0 as usize) >= ts.event_names().len() {
            return Err(SystemError::UnknownEvent(format!("#{}", step.event.0)));
        }
        if witnesses.insert(step.witness.clone(), ()).is_some() {
            return Err(SystemError::DuplicateWitness(step.witness.clone()));
        }
        if triples
            .insert((step.src, step.event, step.dst), ())
            .is_some()
        {
            return Err(SystemError::DuplicateTriple {
                src: ts.state_name(step.src).into(),
                event: ts.event_name(step.event).into(),
                dst: ts.state_name(step.dst).into(),
            });
        }
    }
    Ok(())
}

/// A morphism of the free trace category: an endpoint-indexed chain of step
/// references. Empty edge list implies `src == dst`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    pub src: StateId,
    pub dst: StateId,
    pub edges: Vec<StepId>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// The length-`n` initial segment.
    pub fn prefix(&self, ts: &TransitionSystem, n: usize) -> Path {
        assert!(n <= self.edges.len());
        let dst = if n == 0 {
            self.src
        } else {
            ts.step(self.edges[n - 1]).dst
        };
        Path {
            src: self.src,
            dst,
            edges: self.edges[..n].to_vec(),
        }
    }

    /// Chain validity against the ambient system.
    pub fn is_valid(&self, ts: &TransitionSystem) -> bool {
        let mut cur = self.src;
        for &e in &self.edges {
            if (e.0 as usize) >= ts.steps().len() {
                return false;
            }
            let step = ts.step(e);
            if step.src != cur {
                return false;
            }
            cur = step.dst;
        }
        cur == self.dst
    }

    /// Report form: `S0 -[E/w01]-> S1 -[F/w12]-> S2`.
    pub fn display(&self, ts: &TransitionSystem) -> String {
        let mut out = ts.state_name(self.src).to_string();
        for &e in &self.edges {
            let step = ts.step(e);
            out.push_str(&format!(
                " -[{}/{}]-> {}",
                ts.event_name(step.event),
                step.witness,
                ts.state_name(step.dst)
            ));
        }
        out
    }
}

/// A trace extension `prefix -> whole`: the prefix path is an initial segment
/// of the whole path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExtensionMorphism {
    pub prefix: Path,
    pub whole: Path,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SemanticsError {
    EndpointMismatch { left_dst: String, right_src: String },
    NotAPrefix,
    UnknownState(String),
    NotNormal(String),
    IllTyped(String),
}

impl fmt::Display for SemanticsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemanticsError::EndpointMismatch {
                left_dst,
                right_src,
            } => write!(
                f,
                "cannot compose: left path ends at `{left_dst}`, right path starts at `{right_src}`"
            ),
            SemanticsError::NotAPrefix => write!(f, "prefix is not an initial segment"),
            SemanticsError::UnknownState(s) => write!(f, "unknown state `{s}`"),
            SemanticsError::NotNormal(m) => write!(f, "term is not a normal trace: {m}"),
            SemanticsError::IllTyped(m) => write!(f, "ill-typed trace term: {m}"),
        }
    }
}

impl std::error::Error for SemanticsError {}

impl ExtensionMorphism {
    pub fn new(prefix: Path, whole: Path) -> Result<ExtensionMorphism, SemanticsError> {
        if prefix.src != whole.src
            || prefix.edges.len() > whole.edges.len()
            || prefix.edges[..] != whole.edges[..prefix.edges.len()]
        {
            return Err(SemanticsError::NotAPrefix);
        }
        Ok(ExtensionMorphism { prefix, whole })
    }

    /// Number of added edges.
    pub fn added(&self) -> usize {
        self.whole.edges.len() - self.prefix.edges.len()
    }

    pub fn is_identity(&self) -> bool {
        self.added() == 0
    }

    pub fn is_one_step(&self) -> bool {
        self.added() == 1
    }
}

/// Identity morphism at a state.
pub fn identity_path(ts: &TransitionSystem, s: StateId) -> Result<Path, SystemError> {
    ts.check_state(s)?;
    Ok(Path {
        src: s,
        dst: s,
        edges: Vec::new(),
    })
}

/// Composition by concatenation; requires `p.dst == q.src`.
pub fn concat(ts: &TransitionSystem, p: &Path, q: &Path) -> Result<Path, SemanticsError> {
    if p.dst != q.src {
        return Err(SemanticsError::EndpointMismatch {
            left_dst: ts.state_name(p.dst).into(),
            right_src: ts.state_name(q.src).into(),
        });
    }
    let mut edges = p.edges.clone();
    edges.extend_from_slice(&q.edges);
    Ok(Path {
        src: p.src,
        dst: q.dst,
        edges,
    })
}

/// Breadth-first reachability; reflexive.
pub fn reachable(ts: &TransitionSystem, s0: StateId, s1: StateId) -> Result<bool, SystemError> {
    ts.check_state(s0)?;
    ts.check_state(s1)?;
    let mut seen = vec![false; ts.state_names().len()];
    let mut queue = VecDeque::new();
    seen[s0.0 as usize] = true;
    queue.push_back(s0);
    while let Some(s) = queue.pop_front() {
        if s == s1 {
            return Ok(true);
        }
        for step in ts.steps() {
            if step.src == s && !seen[step.dst.0 as usize] {
                seen[step.dst.0 as usize] = true;
                queue.push_back(step.dst);
            }
        }
    }
    Ok(false)
}

/// Shortest path from `s0` to `s1` if one exists. Among shortest paths the
/// result is lexicographically least in step declaration order, so a diamond
/// resolves to the earlier-declared first edge.
pub fn witness_path(
    ts: &TransitionSystem,
    s0: StateId,
    s1: StateId,
) -> Result<Option<Path>, SystemError> {
    ts.check_state(s0)?;
    ts.check_state(s1)?;
    // distances to s1 over reversed edges
    let n = ts.state_names().len();
    let mut dist = vec![usize::MAX; n];
    dist[s1.0 as usize] = 0;
    let mut queue = VecDeque::new();
    queue.push_back(s1);
    while let Some(s) = queue.pop_front() {
        for step in ts.steps() {
            if step.dst == s && dist[step.src.0 as usize] == usize::MAX {
                dist[step.src.0 as usize] = dist[s.0 as usize] + 1;
                queue.push_back(step.src);
            }
        }
    }
    if dist[s0.0 as usize] == usize::MAX {
        return Ok(None);
    }
    // greedy reconstruction: at each hop take the first declared step that
    // stays on a shortest route
    let mut edges = Vec::new();
    let mut cur = s0;
    while cur != s1 || dist[cur.0 as usize] != 0 {
        let remaining = dist[cur.0 as usize];
        let (idx, step) = ts
            .steps()
            .iter()
            .enumerate()
            .find(|(_, step)| step.src == cur && dist[step.dst.0 as usize] + 1 == remaining)
            .expect("distance table is consistent");
        edges.push(StepId(idx as u32));
        cur = step.dst;
        if remaining == 1 {
            break;
        }
    }
    Ok(Some(Path {
        src: s0,
        dst: s1,
        edges,
    }))
}

/// Interpret a closed normal trace term as a path: `nil` to the identity,
/// `step` to composition with the generating transition.
pub fn interp(ts: &TransitionSystem, t: &Term) -> Result<Path, SemanticsError> {
    match t {
        Term::Nil(state) => match state.as_ref() {
            Term::StateConst(name) => {
                let id = ts
                    .state(name)
                    .ok_or_else(|| SemanticsError::UnknownState(name.clone()))?;
                Ok(Path {
                    src: id,
                    dst: id,
                    edges: Vec::new(),
                })
            }
            other => Err(SemanticsError::NotNormal(format!(
                "nil endpoint is not a state constant: {other:?}"
            ))),
        },
        Term::Step(prefix, event, witness) => {
            let base = interp(ts, prefix)?;
            let wname = match witness.as_ref() {
                Term::StepWitness(w) => w,
                other => {
                    return Err(SemanticsError::NotNormal(format!(
                        "step witness is not a declared constant: {other:?}"
                    )))
                }
            };
            let step_id = ts
                .witness(wname)
                .ok_or_else(|| SemanticsError::IllTyped(format!("unknown witness `{wname}`")))?;
            let step = ts.step(step_id);
            match event.as_ref() {
                Term::EventConst(e) if ts.event(e) == Some(step.event) => {}
                other => {
                    return Err(SemanticsError::IllTyped(format!(
                        "event {other:?} does not match witness `{wname}`"
                    )))
                }
            }
            if base.dst != step.src {
                return Err(SemanticsError::IllTyped(format!(
                    "prefix ends at `{}` but witness `{wname}` starts at `{}`",
                    ts.state_name(base.dst),
                    ts.state_name(step.src)
                )));
            }
            let mut edges = base.edges;
            edges.push(step_id);
            Ok(Path {
                src: base.src,
                dst: step.dst,
                edges,
            })
        }
        other => Err(SemanticsError::NotNormal(format!(
            "not a trace constructor: {other:?}"
        ))),
    }
}

/// Reconstruct the closed normal trace term denoting a path.
pub fn reify(ts: &TransitionSystem, p: &Path) -> Term {
    let mut t = Term::nil(Term::state(ts.state_name(p.src)));
    for &e in &p.edges {
        let step = ts.step(e);
        t = Term::step(
            t,
            Term::event(ts.event_name(step.event)),
            Term::witness(step.witness.clone()),
        );
    }
    t
}

/// All paths from the given roots with at most `max_len` edges, ordered by
/// (length, root declaration index, edge index sequence). No duplicates.
pub fn enumerate_traces(ts: &TransitionSystem, roots: &[StateId], max_len: usize) -> Vec<Path> {
    let mut roots_sorted: Vec<StateId> = roots.to_vec();
    roots_sorted.sort();
    roots_sorted.dedup();
    let mut out = Vec::new();
    let mut frontier: Vec<Path> = roots_sorted
        .iter()
        .map(|&s| Path {
            src: s,
            dst: s,
            edges: Vec::new(),
        })
        .collect();
    out.extend(frontier.iter().cloned());
    for _ in 0..max_len {
        let mut next = Vec::new();
        for p in &frontier {
            for (idx, step) in ts.steps().iter().enumerate() {
                if step.src == p.dst {
                    let mut edges = p.edges.clone();
                    edges.push(StepId(idx as u32));
                    next.push(Path {
                        src: p.src,
                        dst: step.dst,
                        edges,
                    });
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain() -> TransitionSystem {
        // S0 -E-> S1 -F-> S2, S3 disconnected
        let mut ts = TransitionSystem::new();
        for s in ["S0", "S1", "S2", "S3"] {
            ts.add_state(s);
        }
        ts.add_event("E");
        ts.add_event("F");
        ts.add_step("S0", "E", "S1", "w01").unwrap();
        ts.add_step("S1", "F", "S2", "w12").unwrap();
        validate_system(&ts).unwrap();
        ts
    }

    #[test]
    fn empty_system_validates() {
        validate_system(&TransitionSystem::new()).unwrap();
    }

    #[test]
    fn undeclared_state_in_step_rejected() {
        let mut ts = TransitionSystem::new();
        ts.add_state("S0");
        ts.add_event("E");
        assert_eq!(
            ts.add_step("S0", "E", "S9", "w"),
            Err(SystemError::UnknownState("S9".into()))
        );
    }

    #[test]
    fn duplicate_witness_rejected() {
        let mut ts = TransitionSystem::new();
        ts.add_state("S0");
        ts.add_state("S1");
        ts.add_event("E");
        ts.add_event("F");
        ts.add_step("S0", "E", "S1", "w").unwrap();
        ts.add_step("S0", "F", "S1", "w").unwrap();
        assert_eq!(
            validate_system(&ts),
            Err(SystemError::DuplicateWitness("w".into()))
        );
    }

    #[test]
    fn duplicate_triple_rejected() {
        let mut ts = TransitionSystem::new();
        ts.add_state("S0");
        ts.add_state("S1");
        ts.add_event("E");
        ts.add_step("S0", "E", "S1", "w1").unwrap();
        ts.add_step("S0", "E", "S1", "w2").unwrap();
        assert!(matches!(
            validate_system(&ts),
            Err(SystemError::DuplicateTriple { .. })
        ));
    }

    #[test]
    fn identity_and_concat_laws_on_chain() {
        let ts = chain();
        let s0 = ts.state("S0").unwrap();
        let id = identity_path(&ts, s0).unwrap();
        assert!(id.is_empty());

        let p = witness_path(&ts, s0, ts.state("S2").unwrap())
            .unwrap()
            .unwrap();
        assert_eq!(concat(&ts, &id, &p).unwrap(), p);
        let id2 = identity_path(&ts, p.dst).unwrap();
        assert_eq!(concat(&ts, &p, &id2).unwrap(), p);
    }

    #[test]
    fn concat_endpoint_mismatch() {
        let ts = chain();
        let p = witness_path(&ts, ts.state("S0").unwrap(), ts.state("S1").unwrap())
            .unwrap()
            .unwrap();
        let err = concat(&ts, &p, &p).unwrap_err();
        assert!(matches!(err, SemanticsError::EndpointMismatch { .. }));
    }

    #[test]
    fn reachability_oracle() {
        let ts = chain();
        let s0 = ts.state("S0").unwrap();
        assert!(reachable(&ts, s0, s0).unwrap());
        assert!(reachable(&ts, s0, ts.state("S2").unwrap()).unwrap());
        assert!(!reachable(&ts, s0, ts.state("S3").unwrap()).unwrap());
        assert!(!reachable(&ts, ts.state("S2").unwrap(), s0).unwrap());
    }

    #[test]
    fn witness_path_shapes() {
        let ts = chain();
        let s0 = ts.state("S0").unwrap();
        let p = witness_path(&ts, s0, s0).unwrap().unwrap();
        assert!(p.is_empty());

        let p = witness_path(&ts, s0, ts.state("S2").unwrap())
            .unwrap()
            .unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.is_valid(&ts));
        assert_eq!(witness_path(&ts, s0, ts.state("S3").unwrap()).unwrap(), None);
    }

    #[test]
    fn diamond_tie_breaks_by_declaration_order() {
        // two shortest S0 -> S3 paths; the earlier-declared first edge wins
        let mut ts = TransitionSystem::new();
        for s in ["S0", "A", "B", "S3"] {
            ts.add_state(s);
        }
        ts.add_event("E");
        ts.add_event("F");
        let first = ts.add_step("S0", "E", "A", "via_a").unwrap();
        ts.add_step("S0", "F", "B", "via_b").unwrap();
        ts.add_step("A", "F", "S3", "a_out").unwrap();
        ts.add_step("B", "E", "S3", "b_out").unwrap();
        validate_system(&ts).unwrap();

        // oracle: enumerate all length-2 paths and keep the lexicographically
        // least edge sequence
        let s0 = ts.state("S0").unwrap();
        let s3 = ts.state("S3").unwrap();
        let mut all: Vec<Path> = enumerate_traces(&ts, &[s0], 2)
            .into_iter()
            .filter(|p| p.dst == s3 && p.len() == 2)
            .collect();
        assert_eq!(all.len(), 2);
        all.sort_by(|a, b| a.edges.cmp(&b.edges));

        let got = witness_path(&ts, s0, s3).unwrap().unwrap();
        assert_eq!(got, all[0]);
        assert_eq!(got.edges[0], first);
    }

    #[test]
    fn interp_nil_and_step() {
        let ts = chain();
        let s0 = ts.state("S0").unwrap();
        let nil = Term::nil(Term::state("S0"));
        assert_eq!(interp(&ts, &nil).unwrap(), identity_path(&ts, s0).unwrap());

        let one = Term::step(nil, Term::event("E"), Term::witness("w01"));
        let p = interp(&ts, &one).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.src, s0);
        assert_eq!(p.dst, ts.state("S1").unwrap());
    }

    #[test]
    fn interp_rejects_non_normal_and_ill_typed() {
        let ts = chain();
        let bad = Term::app(Term::lam(Term::var(0)), Term::nil(Term::state("S0")));
        assert!(matches!(
            interp(&ts, &bad),
            Err(SemanticsError::NotNormal(_))
        ));
        // witness does not start where the prefix ends
        let bad = Term::step(
            Term::nil(Term::state("S1")),
            Term::event("E"),
            Term::witness("w01"),
        );
        assert!(matches!(interp(&ts, &bad), Err(SemanticsError::IllTyped(_))));
    }

    #[test]
    fn reify_interp_round_trip_exhaustive_len6() {
        let ts = chain();
        let roots: Vec<StateId> = ts.states().collect();
        for p in enumerate_traces(&ts, &roots, 6) {
            let t = reify(&ts, &p);
            assert_eq!(interp(&ts, &t).unwrap(), p);
        }
    }

    #[test]
    fn enumerate_counts() {
        // self-loop: 1 path per length 0..=3
        let mut ts = TransitionSystem::new();
        ts.add_state("S");
        ts.add_event("E");
        ts.add_step("S", "E", "S", "w").unwrap();
        let s = ts.state("S").unwrap();
        assert_eq!(enumerate_traces(&ts, &[s], 3).len(), 4);

        // branching factor 2: 1 + 2 + 4 = 7 paths up to length 2
        let mut ts = TransitionSystem::new();
        ts.add_state("S");
        ts.add_event("L");
        ts.add_event("R");
        ts.add_step("S", "L", "S", "l").unwrap();
        ts.add_step("S", "R", "S", "r").unwrap();
        let s = ts.state("S").unwrap();
        assert_eq!(enumerate_traces(&ts, &[s], 2).len(), 7);

        // maxLen 0: one empty path per root
        let ts = chain();
        let roots: Vec<StateId> = ts.states().collect();
        let paths = enumerate_traces(&ts, &roots, 0);
        assert_eq!(paths.len(), 4);
        assert!(paths.iter().all(|p| p.is_empty()));
    }

    #[test]
    fn enumerate_order_is_length_lexicographic() {
        let ts = chain();
        let roots: Vec<StateId> = ts.states().collect();
        let paths = enumerate_traces(&ts, &roots, 3);
        for w in paths.windows(2) {
            let key = |p: &Path| (p.len(), p.src, p.edges.clone());
            assert!(key(&w[0]) < key(&w[1]), "{:?} !< {:?}", w[0], w[1]);
        }
        // no duplicates
        let mut seen = std::collections::BTreeSet::new();
        for p in &paths {
            assert!(seen.insert(p.clone()));
        }
    }

    #[test]
    fn extension_morphism_invariants() {
        let ts = chain();
        let s0 = ts.state("S0").unwrap();
        let whole = witness_path(&ts, s0, ts.state("S2").unwrap())
            .unwrap()
            .unwrap();
        let prefix = whole.prefix(&ts, 1);
        let ext = ExtensionMorphism::new(prefix, whole.clone()).unwrap();
        assert!(ext.is_one_step());

        let other = identity_path(&ts, ts.state("S1").unwrap()).unwrap();
        assert_eq!(
            ExtensionMorphism::new(other, whole),
            Err(SemanticsError::NotAPrefix)
        );
    }

    #[test]
    fn path_display_format() {
        let ts = chain();
        let p = witness_path(&ts, ts.state("S0").unwrap(), ts.state("S2").unwrap())
            .unwrap()
            .unwrap();
        assert_eq!(p.display(&ts), "S0 -[E/w01]-> S1 -[F/w12]-> S2");
    }

    proptest! {
        /// Associativity of concatenation on random composable triples.
        #[test]
        fn concat_associative(seed in 0u64..500) {
            let ts = chain();
            let roots: Vec<StateId> = ts.states().collect();
            let paths = enumerate_traces(&ts, &roots, 4);
            // pseudo-random composable triple from the seed
            let mut k = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            let mut pick = |from: StateId| {
                let candidates: Vec<&Path> =
                    paths.iter().filter(|p| p.src == from).collect();
                k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                candidates[(k >> 33) as usize % candidates.len()].clone()
            };
            let p = pick(roots[(seed % roots.len() as u64) as usize]);
            let q = pick(p.dst);
            let r = pick(q.dst);
            let left = concat(&ts, &concat(&ts, &p, &q).unwrap(), &r).unwrap();
            let right = concat(&ts, &p, &concat(&ts, &q, &r).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }
    }
}
