//! Instance model for the secret protection problem: a nondeterministic
//! finite automaton with protectable events (clearance and cost), per-state
//! security levels, and the line-oriented `spp` text format.
//!
//! Instances are immutable after construction and canonicalized: states and
//! events are sorted by name, transitions are sorted and deduplicated. Two
//! instances with the same structural content compare equal regardless of
//! declaration order.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Index of a state within its instance. States are sorted by name, so index
/// order is name order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State(pub(crate) u32);

impl State {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index of an event within its instance. Events are sorted by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event(pub(crate) u32);

impl Event {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Attributes of a declared event. Unprotectable events carry neither
/// clearance nor cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Protectable { clearance: u64, cost: u64 },
    Unprotectable,
}

/// One transition of the automaton. The relation is nondeterministic:
/// several transitions may share `from` and `event`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Transition {
    pub from: State,
    pub event: Event,
    pub to: State,
}

/// A validated SPP instance.
///
/// The secret set is derived, never stored: a state is secret iff its
/// security level is positive. Initial states are never secret.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SppInstance {
    state_names: Vec<String>,
    event_names: Vec<String>,
    event_kinds: Vec<EventKind>,
    transitions: Vec<Transition>,
    initial: Vec<State>,
    security: Vec<u64>,
}

/// A protecting policy: a set of events. Use sites check that every member
/// is protectable in the governing instance.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Policy {
    events: Vec<Event>,
}

impl Policy {
    pub fn empty() -> Self {
        Policy { events: Vec::new() }
    }

    pub fn from_events<I: IntoIterator<Item = Event>>(events: I) -> Self {
        let mut events: Vec<Event> = events.into_iter().collect();
        events.sort_unstable();
        events.dedup();
        Policy { events }
    }

    /// Resolves event names against an instance. Fails on names that are
    /// undeclared or not protectable.
    pub fn from_names<S: AsRef<str>>(inst: &SppInstance, names: &[S]) -> Result<Self, PolicyError> {
        let mut events = Vec::with_capacity(names.len());
        for name in names {
            let name = name.as_ref();
            let ev = inst
                .event(name)
                .ok_or_else(|| PolicyError::UnknownEvent(name.to_string()))?;
            if !inst.is_protectable(ev) {
                return Err(PolicyError::UnprotectableEvent(name.to_string()));
            }
            events.push(ev);
        }
        Ok(Policy::from_events(events))
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn contains(&self, ev: Event) -> bool {
        self.events.binary_search(&ev).is_ok()
    }

    /// Sorted event names, comma-joined.
    pub fn render(&self, inst: &SppInstance) -> String {
        let names: Vec<&str> = self.events.iter().map(|&e| inst.event_name(e)).collect();
        names.join(",")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("event `{0}` is not protectable")]
    UnprotectableEvent(String),
}

/// Structural validation errors, shared by the parser and the builder.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("invalid name `{0}`: names are non-empty and free of whitespace, commas, and `#`")]
    InvalidName(String),
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("duplicate event `{0}`")]
    DuplicateEvent(String),
    #[error("undeclared state `{0}`")]
    UnknownState(String),
    #[error("undeclared event `{0}`")]
    UnknownEvent(String),
    #[error("secret initial state `{0}`")]
    SecretInitialState(String),
    #[error("no initial states declared")]
    NoInitialStates,
    #[error("attribute magnitudes too large: {0}")]
    AttributeOverflow(&'static str),
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && !name.contains(|c: char| c.is_whitespace() || c == ',' || c == '#')
}

/// Incremental constructor for [`SppInstance`]. All invariants are checked
/// in [`InstanceBuilder::build`], which also canonicalizes order.
#[derive(Default)]
pub struct InstanceBuilder {
    states: Vec<(String, u64)>,
    state_index: HashMap<String, usize>,
    events: Vec<(String, EventKind)>,
    event_index: HashMap<String, usize>,
    transitions: Vec<(usize, usize, usize)>,
    initial: Vec<usize>,
}

impl InstanceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a state with security level `level` (0 = non-secret).
    pub fn state(&mut self, name: &str, level: u64) -> Result<(), InstanceError> {
        if !valid_name(name) {
            return Err(InstanceError::InvalidName(name.to_string()));
        }
        if self.state_index.contains_key(name) {
            return Err(InstanceError::DuplicateState(name.to_string()));
        }
        self.state_index.insert(name.to_string(), self.states.len());
        self.states.push((name.to_string(), level));
        Ok(())
    }

    pub fn event(&mut self, name: &str, kind: EventKind) -> Result<(), InstanceError> {
        if !valid_name(name) {
            return Err(InstanceError::InvalidName(name.to_string()));
        }
        if self.event_index.contains_key(name) {
            return Err(InstanceError::DuplicateEvent(name.to_string()));
        }
        self.event_index.insert(name.to_string(), self.events.len());
        self.events.push((name.to_string(), kind));
        Ok(())
    }

    pub fn protectable(
        &mut self,
        name: &str,
        clearance: u64,
        cost: u64,
    ) -> Result<(), InstanceError> {
        self.event(name, EventKind::Protectable { clearance, cost })
    }

    pub fn unprotectable(&mut self, name: &str) -> Result<(), InstanceError> {
        self.event(name, EventKind::Unprotectable)
    }

    pub fn transition(&mut self, from: &str, event: &str, to: &str) -> Result<(), InstanceError> {
        let f = *self
            .state_index
            .get(from)
            .ok_or_else(|| InstanceError::UnknownState(from.to_string()))?;
        let e = *self
            .event_index
            .get(event)
            .ok_or_else(|| InstanceError::UnknownEvent(event.to_string()))?;
        let t = *self
            .state_index
            .get(to)
            .ok_or_else(|| InstanceError::UnknownState(to.to_string()))?;
        self.transitions.push((f, e, t));
        Ok(())
    }

    pub fn initial(&mut self, name: &str) -> Result<(), InstanceError> {
        let s = *self
            .state_index
            .get(name)
            .ok_or_else(|| InstanceError::UnknownState(name.to_string()))?;
        if self.states[s].1 > 0 {
            return Err(InstanceError::SecretInitialState(name.to_string()));
        }
        self.initial.push(s);
        Ok(())
    }

    pub fn build(self) -> Result<SppInstance, InstanceError> {
        if self.initial.is_empty() {
            return Err(InstanceError::NoInitialStates);
        }

        // Canonical order: states and events sorted by name.
        let mut state_order: Vec<usize> = (0..self.states.len()).collect();
        state_order.sort_by(|&a, &b| self.states[a].0.cmp(&self.states[b].0));
        let mut state_rank = vec![0u32; self.states.len()];
        for (rank, &old) in state_order.iter().enumerate() {
            state_rank[old] = rank as u32;
        }

        let mut event_order: Vec<usize> = (0..self.events.len()).collect();
        event_order.sort_by(|&a, &b| self.events[a].0.cmp(&self.events[b].0));
        let mut event_rank = vec![0u32; self.events.len()];
        for (rank, &old) in event_order.iter().enumerate() {
            event_rank[old] = rank as u32;
        }

        let state_names: Vec<String> = state_order
            .iter()
            .map(|&i| self.states[i].0.clone())
            .collect();
        let security: Vec<u64> = state_order.iter().map(|&i| self.states[i].1).collect();
        let event_names: Vec<String> = event_order
            .iter()
            .map(|&i| self.events[i].0.clone())
            .collect();
        let event_kinds: Vec<EventKind> = event_order.iter().map(|&i| self.events[i].1).collect();

        let mut transitions: Vec<Transition> = self
            .transitions
            .iter()
            .map(|&(f, e, t)| Transition {
                from: State(state_rank[f]),
                event: Event(event_rank[e]),
                to: State(state_rank[t]),
            })
            .collect();
        transitions.sort_unstable();
        transitions.dedup();

        let mut initial: Vec<State> = self.initial.iter().map(|&s| State(state_rank[s])).collect();
        initial.sort_unstable();
        initial.dedup();

        let inst = SppInstance {
            state_names,
            event_names,
            event_kinds,
            transitions,
            initial,
            security,
        };
        inst.check_headroom()?;
        Ok(inst)
    }
}

impl SppInstance {
    /// Guards against overflow in downstream arithmetic: any policy cost,
    /// any simple-path clearance, and any distinct-event clearance must fit
    /// in a u64.
    fn check_headroom(&self) -> Result<(), InstanceError> {
        let mut cost_sum: u128 = 0;
        let mut gamma_sum: u128 = 0;
        let mut gamma_max: u128 = 0;
        for kind in &self.event_kinds {
            if let EventKind::Protectable { clearance, cost } = *kind {
                cost_sum += cost as u128;
                gamma_sum += clearance as u128;
                gamma_max = gamma_max.max(clearance as u128);
            }
        }
        if cost_sum > u64::MAX as u128 {
            return Err(InstanceError::AttributeOverflow(
                "total event cost exceeds u64",
            ));
        }
        if gamma_sum > u64::MAX as u128 {
            return Err(InstanceError::AttributeOverflow(
                "total clearance exceeds u64",
            ));
        }
        if (self.state_names.len() as u128) * gamma_max > u64::MAX as u128 {
            return Err(InstanceError::AttributeOverflow(
                "states x max clearance exceeds u64",
            ));
        }
        Ok(())
    }

    pub fn state_count(&self) -> usize {
        self.state_names.len()
    }

    pub fn event_count(&self) -> usize {
        self.event_names.len()
    }

    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.state_names.len() as u32).map(State)
    }

    pub fn events(&self) -> impl Iterator<Item = Event> + '_ {
        (0..self.event_names.len() as u32).map(Event)
    }

    pub fn state_name(&self, s: State) -> &str {
        &self.state_names[s.index()]
    }

    pub fn event_name(&self, e: Event) -> &str {
        &self.event_names[e.index()]
    }

    pub fn state(&self, name: &str) -> Option<State> {
        self.state_names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| State(i as u32))
    }

    pub fn event(&self, name: &str) -> Option<Event> {
        self.event_names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| Event(i as u32))
    }

    pub fn event_kind(&self, e: Event) -> EventKind {
        self.event_kinds[e.index()]
    }

    pub fn is_protectable(&self, e: Event) -> bool {
        matches!(self.event_kinds[e.index()], EventKind::Protectable { .. })
    }

    /// Clearance units granted per occurrence of a protected event. `None`
    /// for unprotectable events.
    pub fn clearance(&self, e: Event) -> Option<u64> {
        match self.event_kinds[e.index()] {
            EventKind::Protectable { clearance, .. } => Some(clearance),
            EventKind::Unprotectable => None,
        }
    }

    pub fn cost(&self, e: Event) -> Option<u64> {
        match self.event_kinds[e.index()] {
            EventKind::Protectable { cost, .. } => Some(cost),
            EventKind::Unprotectable => None,
        }
    }

    pub fn protectable_events(&self) -> impl Iterator<Item = Event> + '_ {
        self.events().filter(|&e| self.is_protectable(e))
    }

    /// The policy containing every protectable event.
    pub fn full_policy(&self) -> Policy {
        Policy::from_events(self.protectable_events())
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn initial_states(&self) -> &[State] {
        &self.initial
    }

    pub fn is_initial(&self, s: State) -> bool {
        self.initial.binary_search(&s).is_ok()
    }

    /// Security level of a state; 0 means non-secret.
    pub fn security_level(&self, s: State) -> u64 {
        self.security[s.index()]
    }

    /// States with positive security level, in index order.
    pub fn secret_states(&self) -> impl Iterator<Item = State> + '_ {
        self.states().filter(|&s| self.security[s.index()] > 0)
    }

    /// Exact cost of a policy: the sum of member costs. Errors if the policy
    /// contains an event that is not protectable here.
    pub fn policy_cost(&self, p: &Policy) -> Result<u64, PolicyError> {
        let mut total: u64 = 0;
        for &e in p.events() {
            if e.index() >= self.event_count() {
                return Err(PolicyError::UnknownEvent(format!("#{}", e.index())));
            }
            match self.event_kinds[e.index()] {
                EventKind::Protectable { cost, .. } => total += cost,
                EventKind::Unprotectable => {
                    return Err(PolicyError::UnprotectableEvent(
                        self.event_name(e).to_string(),
                    ))
                }
            }
        }
        Ok(total)
    }

    /// Serializes to the `spp` text format. Output is deterministic: states,
    /// events, and transitions are emitted in sorted order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("spp 1\n");
        for s in self.states() {
            let level = self.security_level(s);
            if level > 0 {
                out.push_str(&format!("state {} secret {}\n", self.state_name(s), level));
            } else {
                out.push_str(&format!("state {}\n", self.state_name(s)));
            }
        }
        out.push_str("initial");
        for &s in &self.initial {
            out.push(' ');
            out.push_str(self.state_name(s));
        }
        out.push('\n');
        for e in self.events() {
            match self.event_kind(e) {
                EventKind::Protectable { clearance, cost } => {
                    out.push_str(&format!(
                        "event {} protectable clearance {} cost {}\n",
                        self.event_name(e),
                        clearance,
                        cost
                    ));
                }
                EventKind::Unprotectable => {
                    out.push_str(&format!("event {} unprotectable\n", self.event_name(e)));
                }
            }
        }
        for t in &self.transitions {
            out.push_str(&format!(
                "trans {} {} {}\n",
                self.state_name(t.from),
                self.event_name(t.event),
                self.state_name(t.to)
            ));
        }
        out
    }
}

/// Serializes an instance to the `spp` text format.
pub fn serialize_instance(inst: &SppInstance) -> String {
    inst.to_text()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, col {col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("line {line}: {source}")]
    Semantic {
        line: usize,
        #[source]
        source: InstanceError,
    },
}

/// Sections must appear in declaration order: header, states, initial,
/// events, transitions.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Header,
    States,
    Initial,
    Events,
    Transitions,
}

struct LineTokens<'a> {
    line_no: usize,
    tokens: Vec<(usize, &'a str)>, // (1-based column, token)
}

fn tokenize(line: &str, line_no: usize) -> LineTokens<'_> {
    let body = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    };
    let mut tokens = Vec::new();
    let mut col = 0;
    for piece in body.split_whitespace() {
        // Columns are byte offsets; names are ASCII in practice.
        let offset = body[col..].find(piece).unwrap() + col;
        tokens.push((offset + 1, piece));
        col = offset + piece.len();
    }
    LineTokens { line_no, tokens }
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        col,
        msg: msg.into(),
    }
}

/// Parses the `spp` text format into a validated instance.
pub fn parse_instance(text: &str) -> Result<SppInstance, ParseError> {
    let mut builder = InstanceBuilder::new();
    let mut section = Section::Header;
    let mut last_line = 0;
    let mut saw_initial = false;

    let sem = |line: usize| move |e: InstanceError| ParseError::Semantic { line, source: e };

    for (idx, raw) in text.lines().enumerate() {
        let lt = tokenize(raw, idx + 1);
        if lt.tokens.is_empty() {
            continue;
        }
        last_line = lt.line_no;
        let (col0, keyword) = lt.tokens[0];
        let line = lt.line_no;

        if section == Section::Header {
            if keyword != "spp" {
                return Err(syntax(line, col0, "expected `spp 1` header"));
            }
            if lt.tokens.len() != 2 || lt.tokens[1].1 != "1" {
                return Err(syntax(
                    line,
                    col0,
                    "unsupported format version (expected `spp 1`)",
                ));
            }
            section = Section::States;
            continue;
        }

        let advance = |section: &mut Section, target: Section| -> Result<(), ParseError> {
            if *section > target {
                return Err(syntax(
                    line,
                    col0,
                    format!("`{keyword}` line out of order (sections: states, initial, events, transitions)"),
                ));
            }
            *section = target;
            Ok(())
        };

        match keyword {
            "state" => {
                advance(&mut section, Section::States)?;
                match lt.tokens.len() {
                    2 => builder.state(lt.tokens[1].1, 0).map_err(sem(line))?,
                    4 if lt.tokens[2].1 == "secret" => {
                        let (lcol, ltok) = lt.tokens[3];
                        let level: u64 = ltok
                            .parse()
                            .map_err(|_| syntax(line, lcol, "expected security level"))?;
                        if level == 0 {
                            return Err(syntax(line, lcol, "secret level must be positive"));
                        }
                        builder.state(lt.tokens[1].1, level).map_err(sem(line))?;
                    }
                    _ => {
                        return Err(syntax(line, col0, "expected `state <name> [secret <L>]`"));
                    }
                }
            }
            "initial" => {
                advance(&mut section, Section::Initial)?;
                if lt.tokens.len() < 2 {
                    return Err(syntax(line, col0, "expected `initial <name> [<name>...]`"));
                }
                for &(_, name) in &lt.tokens[1..] {
                    builder.initial(name).map_err(sem(line))?;
                }
                saw_initial = true;
            }
            "event" => {
                advance(&mut section, Section::Events)?;
                let toks: Vec<&str> = lt.tokens.iter().map(|&(_, t)| t).collect();
                match toks.as_slice() {
                    ["event", name, "unprotectable"] => {
                        builder.unprotectable(name).map_err(sem(line))?;
                    }
                    ["event", name, "protectable", "clearance", g, "cost", c] => {
                        let clearance: u64 = g.parse().map_err(|_| {
                            syntax(line, lt.tokens[4].0, "expected clearance value")
                        })?;
                        let cost: u64 = c
                            .parse()
                            .map_err(|_| syntax(line, lt.tokens[6].0, "expected cost value"))?;
                        builder
                            .protectable(name, clearance, cost)
                            .map_err(sem(line))?;
                    }
                    ["event", _, "unprotectable", ..] | ["event", _, "protectable", ..] => {
                        return Err(syntax(
                            line,
                            col0,
                            "expected `event <name> protectable clearance <g> cost <c>` or `event <name> unprotectable`",
                        ));
                    }
                    _ => {
                        return Err(syntax(line, col0, "malformed event declaration"));
                    }
                }
            }
            "trans" => {
                advance(&mut section, Section::Transitions)?;
                if lt.tokens.len() != 4 {
                    return Err(syntax(line, col0, "expected `trans <from> <event> <to>`"));
                }
                builder
                    .transition(lt.tokens[1].1, lt.tokens[2].1, lt.tokens[3].1)
                    .map_err(sem(line))?;
            }
            other => {
                return Err(syntax(line, col0, format!("unknown directive `{other}`")));
            }
        }
    }

    if section == Section::Header {
        return Err(syntax(last_line.max(1), 1, "missing `spp 1` header"));
    }
    if !saw_initial {
        return Err(ParseError::Semantic {
            line: last_line.max(1),
            source: InstanceError::NoInitialStates,
        });
    }
    builder.build().map_err(|e| ParseError::Semantic {
        line: last_line.max(1),
        source: e,
    })
}

impl FromStr for SppInstance {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_instance(s)
    }
}

impl fmt::Display for SppInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
