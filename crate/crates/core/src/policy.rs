//! Policy tables: storage, text serialization, slicing and the
//! switching-structure check for the relay decision.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{index_state_unchecked, state_index_unchecked, Action, State, TruncationLevel};

/// Deterministic stationary policy over the truncated state space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyTable {
    n: TruncationLevel,
    actions: Vec<Action>,
}

impl PolicyTable {
    pub fn new(n: TruncationLevel, actions: Vec<Action>) -> Result<Self> {
        if actions.len() != n.num_states() {
            return Err(Error::ShapeMismatch(format!(
                "{} actions for N={n}, expected {}",
                actions.len(),
                n.num_states()
            )));
        }
        Ok(Self { n, actions })
    }

    pub fn constant(n: TruncationLevel, action: Action) -> Self {
        Self {
            n,
            actions: vec![action; n.num_states()],
        }
    }

    pub fn from_fn(n: TruncationLevel, mut f: impl FnMut(&State) -> Action) -> Self {
        let actions = (0..n.num_states())
            .map(|i| f(&index_state_unchecked(i, n)))
            .collect();
        Self { n, actions }
    }

    pub fn truncation(&self) -> TruncationLevel {
        self.n
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    #[inline]
    pub fn at_index(&self, index: usize) -> Action {
        self.actions[index]
    }

    /// Action at `state`; the state must lie in the truncated space.
    #[inline]
    pub fn action(&self, state: &State) -> Action {
        debug_assert!(state.within(self.n));
        self.actions[state_index_unchecked(state, self.n)]
    }

    pub fn set(&mut self, state: &State, action: Action) {
        let i = state_index_unchecked(state, self.n);
        self.actions[i] = action;
    }
}

// ---------------------------------------------------------------------------
// Serialization

pub const POLICY_FORMAT_VERSION: u32 = 1;
const POLICY_MAGIC: &str = "# relay-aoi policy";

/// A policy together with the provenance recorded in its file header.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile {
    pub policy: PolicyTable,
    pub params_hash: String,
    pub lambda: f64,
}

/// Renders the versioned text format: a `key=value` header followed by one
/// line of action codes (`3 * alpha + beta`) per first-source state, then
/// an `end` marker.
pub fn render_policy(file: &PolicyFile) -> String {
    let n = file.policy.n;
    let m = n.source_states();
    let mut out = String::with_capacity(n.num_states() + m + 256);
    out.push_str(POLICY_MAGIC);
    out.push('\n');
    out.push_str(&format!("version={POLICY_FORMAT_VERSION}\n"));
    out.push_str(&format!("n={n}\n"));
    out.push_str(&format!("states={}\n", n.num_states()));
    out.push_str(&format!("params_hash={}\n", file.params_hash));
    out.push_str(&format!("lambda={:?}\n", file.lambda));
    out.push_str("actions\n");
    for row in file.policy.actions.chunks(m) {
        out.extend(row.iter().map(|a| char::from(b'0' + a.code())));
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

pub fn parse_policy(text: &str) -> Result<PolicyFile> {
    let parse_err = |line: usize, reason: &str| Error::Parse {
        line,
        reason: reason.to_string(),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    match lines.next() {
        Some((_, l)) if l.trim_end() == POLICY_MAGIC => {}
        Some((i, _)) => return Err(parse_err(i, "missing policy header")),
        None => return Err(parse_err(1, "empty file")),
    }

    let mut version = None;
    let mut n = None;
    let mut states = None;
    let mut params_hash = None;
    let mut lambda = None;
    let mut last_line = 1;
    loop {
        let Some((i, line)) = lines.next() else {
            return Err(parse_err(last_line + 1, "unexpected end of file in header"));
        };
        last_line = i;
        let line = line.trim_end();
        if line == "actions" {
            break;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(i, "expected key=value"))?;
        let bad = |what: &str| parse_err(i, &format!("invalid {what} `{value}`"));
        match key {
            "version" => version = Some(value.parse::<u32>().map_err(|_| bad("version"))?),
            "n" => n = Some(value.parse::<u32>().map_err(|_| bad("n"))?),
            "states" => states = Some(value.parse::<usize>().map_err(|_| bad("state count"))?),
            "params_hash" => params_hash = Some(value.to_string()),
            "lambda" => lambda = Some(value.parse::<f64>().map_err(|_| bad("lambda"))?),
            _ => return Err(parse_err(i, &format!("unknown header key `{key}`"))),
        }
    }

    let version = version.ok_or_else(|| parse_err(last_line, "missing version"))?;
    if version != POLICY_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: POLICY_FORMAT_VERSION,
        });
    }
    let n = n.ok_or_else(|| parse_err(last_line, "missing n"))?;
    let n = TruncationLevel::new(n).map_err(|e| parse_err(last_line, &e.to_string()))?;
    let states = states.ok_or_else(|| parse_err(last_line, "missing states"))?;
    if states != n.num_states() {
        return Err(Error::ShapeMismatch(format!(
            "header declares {states} states but N={n} has {}",
            n.num_states()
        )));
    }

    let mut actions = Vec::with_capacity(states);
    let mut saw_end = false;
    for (i, line) in lines.by_ref() {
        last_line = i;
        let line = line.trim_end();
        if line == "end" {
            saw_end = true;
            break;
        }
        for b in line.bytes() {
            let code = b.wrapping_sub(b'0');
            let action =
                Action::from_code(code).map_err(|_| parse_err(i, "invalid action code"))?;
            actions.push(action);
        }
    }
    if !saw_end {
        return Err(parse_err(last_line + 1, "unexpected end of file in action table"));
    }
    if let Some((i, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(parse_err(i, "trailing content after end marker"));
    }
    if actions.len() != states {
        return Err(Error::ShapeMismatch(format!(
            "{} action codes, expected {states}",
            actions.len()
        )));
    }

    Ok(PolicyFile {
        policy: PolicyTable { n, actions },
        params_hash: params_hash.ok_or_else(|| parse_err(last_line, "missing params_hash"))?,
        lambda: lambda.ok_or_else(|| parse_err(last_line, "missing lambda"))?,
    })
}

pub fn save_policy(file: &PolicyFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_policy(file)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<PolicyFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_policy(&text)
}

/// Loads a policy and checks its truncation level.
pub fn load_policy_expecting(path: impl AsRef<Path>, n: TruncationLevel) -> Result<PolicyFile> {
    let file = load_policy(path)?;
    if file.policy.n != n {
        return Err(Error::ShapeMismatch(format!(
            "policy has N={}, expected N={n}",
            file.policy.n
        )));
    }
    Ok(file)
}

// ---------------------------------------------------------------------------
// Switching structure

/// Destination-age axis along which the relay decision is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchAxis {
    Y1,
    Y2,
}

impl SwitchAxis {
    pub const BOTH: [SwitchAxis; 2] = [SwitchAxis::Y1, SwitchAxis::Y2];

    fn source(self) -> usize {
        match self {
            SwitchAxis::Y1 => 0,
            SwitchAxis::Y2 => 1,
        }
    }
}

impl fmt::Display for SwitchAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SwitchAxis::Y1 => "y1",
            SwitchAxis::Y2 => "y2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingViolation {
    pub state: State,
    pub action: Action,
    pub next_state: State,
    pub next_action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingReport {
    pub axis: SwitchAxis,
    /// Number of adjacent state pairs that were compared.
    pub checked: usize,
    pub violations: Vec<SwitchingViolation>,
}

impl SwitchingReport {
    pub fn is_switching(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that relay decision `beta = i` persists as `y_i` grows.
///
/// The property is checked on adjacent pairs `(s, s + e_{y_i})`, which by
/// induction covers every increment. Pairs are skipped when either state has
/// some absolute destination age `theta_j + x_j + y_j >= N`: such states sit
/// on (or beyond) the cap, where the truncated model merges distinct ages.
pub fn verify_switching(policy: &PolicyTable) -> [SwitchingReport; 2] {
    SwitchAxis::BOTH.map(|axis| verify_switching_axis(policy, axis))
}

pub fn verify_switching_axis(policy: &PolicyTable, axis: SwitchAxis) -> SwitchingReport {
    let n = policy.n;
    let cap = n.get();
    let i = axis.source();
    let served = i as u8 + 1;
    let below_cap = |s: &State| s.sources.iter().all(|src| src.destination_age() < cap);

    let mut checked = 0;
    let mut violations = Vec::new();
    for (index, &action) in policy.actions.iter().enumerate() {
        if action.beta != served {
            continue;
        }
        let state = index_state_unchecked(index, n);
        let mut next_state = state;
        next_state.sources[i].y += 1;
        if !below_cap(&state) || !below_cap(&next_state) {
            continue;
        }
        checked += 1;
        let next_action = policy.action(&next_state);
        if next_action.beta != served {
            violations.push(SwitchingViolation {
                state,
                action,
                next_state,
                next_action,
            });
        }
    }
    SwitchingReport {
        axis,
        checked,
        violations,
    }
}

// ---------------------------------------------------------------------------
// Slices

/// State coordinates, listed in the grouped display order
/// `(theta1, theta2, x1, x2, y1, y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    Theta1,
    Theta2,
    X1,
    X2,
    Y1,
    Y2,
}

impl Coord {
    pub const DISPLAY_ORDER: [Coord; 6] = [
        Coord::Theta1,
        Coord::Theta2,
        Coord::X1,
        Coord::X2,
        Coord::Y1,
        Coord::Y2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Coord::Theta1 => "theta1",
            Coord::Theta2 => "theta2",
            Coord::X1 => "x1",
            Coord::X2 => "x2",
            Coord::Y1 => "y1",
            Coord::Y2 => "y2",
        }
    }

    /// Position in the canonical `(theta1, x1, y1, theta2, x2, y2)` tuple.
    fn canonical_position(self) -> usize {
        match self {
            Coord::Theta1 => 0,
            Coord::X1 => 1,
            Coord::Y1 => 2,
            Coord::Theta2 => 3,
            Coord::X2 => 4,
            Coord::Y2 => 5,
        }
    }
}

impl FromStr for Coord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Coord::DISPLAY_ORDER
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidSlice(format!("unknown coordinate `{s}`")))
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionComponent {
    Alpha,
    Beta,
}

impl ActionComponent {
    pub fn of(self, action: Action) -> u8 {
        match self {
            ActionComponent::Alpha => action.alpha,
            ActionComponent::Beta => action.beta,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionComponent::Alpha => "alpha",
            ActionComponent::Beta => "beta",
        }
    }
}

impl FromStr for ActionComponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(ActionComponent::Alpha),
            "beta" => Ok(ActionComponent::Beta),
            _ => Err(Error::InvalidSlice(format!("unknown action component `{s}`"))),
        }
    }
}

/// Which 2-D slice of a policy to extract.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSpec {
    pub component: ActionComponent,
    pub fixed: Vec<(Coord, u32)>,
    /// `(row axis, column axis)`.
    pub free: (Coord, Coord),
}

impl SliceSpec {
    /// Parses `component=beta,theta1=1,theta2=1,x1=2,x2=0,free=y1:y2`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut component = None;
        let mut fixed = Vec::new();
        let mut free = None;
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidSlice(format!("expected key=value, got `{part}`")))?;
            match key.trim() {
                "component" => component = Some(value.trim().parse()?),
                "free" => {
                    let (a, b) = value.split_once(':').ok_or_else(|| {
                        Error::InvalidSlice(format!("free axes must look like `y1:y2`, got `{value}`"))
                    })?;
                    free = Some((a.trim().parse()?, b.trim().parse()?));
                }
                coord => {
                    let coord: Coord = coord.parse()?;
                    let v = value.trim().parse::<u32>().map_err(|_| {
                        Error::InvalidSlice(format!("invalid value `{value}` for {coord}"))
                    })?;
                    fixed.push((coord, v));
                }
            }
        }
        Ok(Self {
            component: component.unwrap_or(ActionComponent::Beta),
            fixed,
            free: free.ok_or_else(|| Error::InvalidSlice("missing free=<a>:<b>".into()))?,
        })
    }

    fn validate(&self, n: TruncationLevel) -> Result<()> {
        let (a, b) = self.free;
        if a == b {
            return Err(Error::InvalidSlice(format!("free axes repeat {a}")));
        }
        let mut seen = Vec::new();
        for &(c, v) in &self.fixed {
            if c == a || c == b {
                return Err(Error::InvalidSlice(format!("{c} cannot be both fixed and free")));
            }
            if seen.contains(&c) {
                return Err(Error::InvalidSlice(format!("{c} fixed twice")));
            }
            if v > n.get() {
                return Err(Error::InvalidSlice(format!("{c}={v} exceeds N={n}")));
            }
            seen.push(c);
        }
        if self.fixed.len() != 4 {
            return Err(Error::InvalidSlice(format!(
                "exactly four coordinates must be fixed, got {}",
                self.fixed.len()
            )));
        }
        Ok(())
    }
}

/// `(N+1) x (N+1)` grid of one action component.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySlice {
    pub spec: SliceSpec,
    /// `grid[u][v]` with `u` on the row axis and `v` on the column axis.
    pub grid: Vec<Vec<u8>>,
}

impl PolicySlice {
    /// State tuple in display order, with free axes named.
    pub fn label(&self) -> String {
        let parts: Vec<String> = Coord::DISPLAY_ORDER
            .iter()
            .map(|c| match self.spec.fixed.iter().find(|(f, _)| f == c) {
                Some((_, v)) => v.to_string(),
                None => c.name().to_string(),
            })
            .collect();
        format!("({})", parts.join(","))
    }

    /// CSV grid. The header's first cell names the fixed coordinates in
    /// display order, followed by the column-axis values.
    pub fn to_csv(&self) -> String {
        let (row_axis, col_axis) = self.spec.free;
        let fixed: Vec<String> = Coord::DISPLAY_ORDER
            .iter()
            .filter_map(|c| {
                self.spec
                    .fixed
                    .iter()
                    .find(|(f, _)| f == c)
                    .map(|(f, v)| format!("{f}={v}"))
            })
            .collect();
        let mut out = format!(
            "{} {}|{}\\{}",
            self.spec.component.name(),
            fixed.join(";"),
            row_axis,
            col_axis
        );
        for v in 0..self.grid.len() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
        for (u, row) in self.grid.iter().enumerate() {
            out.push_str(&u.to_string());
            for cell in row {
                out.push_str(&format!(",{cell}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn policy_slice(policy: &PolicyTable, spec: &SliceSpec) -> Result<PolicySlice> {
    let n = policy.n;
    spec.validate(n)?;
    let mut coords = [0u32; 6];
    for &(c, v) in &spec.fixed {
        coords[c.canonical_position()] = v;
    }
    let (row_axis, col_axis) = spec.free;
    let side = n.base();
    let mut grid = vec![vec![0u8; side]; side];
    for (u, row) in grid.iter_mut().enumerate() {
        for (v, cell) in row.iter_mut().enumerate() {
            coords[row_axis.canonical_position()] = u as u32;
            coords[col_axis.canonical_position()] = v as u32;
            *cell = spec.component.of(policy.action(&State::from_tuple(coords)));
        }
    }
    Ok(PolicySlice {
        spec: spec.clone(),
        grid,
    })
}
