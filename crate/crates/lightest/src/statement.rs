//! Interned statements and the registry that owns them.
//!
//! A statement is a symbolic atom `label(arg, ...)` with integer arguments.
//! Interning assigns dense ids so solvers can use plain vectors for weights
//! and backpointers.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use indexmap::{Equivalent, IndexSet};

/// Interned handle of a statement registered in a [`Registry`].
///
/// Ids are dense (`0..registry.len()`) and stable for the lifetime of the
/// problem instance they were interned for.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Statement(u32);

impl Statement {
    pub fn id(self) -> usize {
        self.0 as usize
    }

    pub(crate) fn from_id(id: usize) -> Self {
        Statement(id as u32)
    }
}

type Key = (Arc<str>, Box<[i32]>);

#[derive(Hash)]
struct KeyRef<'a>(&'a str, &'a [i32]);

impl Equivalent<Key> for KeyRef<'_> {
    fn equivalent(&self, key: &Key) -> bool {
        self.0 == &*key.0 && self.1 == &*key.1
    }
}

/// Bijective interning table: `(label, args) <-> dense id`.
#[derive(Clone, Default)]
pub struct Registry {
    keys: IndexSet<Key, BuildKeyHasher>,
    labels: IndexSet<Arc<str>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the existing id for a previously seen `(label, args)` pair and
    /// a fresh dense id otherwise.
    pub fn intern(&mut self, label: &str, args: &[i32]) -> Statement {
        assert!(!label.is_empty(), "statement label must be non-empty");
        if let Some(idx) = self.keys.get_index_of(&KeyRef(label, args)) {
            return Statement(idx as u32);
        }
        let label = match self.labels.get(label) {
            Some(shared) => shared.clone(),
            None => {
                let arc: Arc<str> = Arc::from(label);
                self.labels.insert(arc.clone());
                arc
            }
        };
        let (idx, _) = self.keys.insert_full((label, args.into()));
        Statement(idx as u32)
    }

    /// Looks a key up without interning it.
    pub fn lookup(&self, label: &str, args: &[i32]) -> Option<Statement> {
        self.keys
            .get_index_of(&KeyRef(label, args))
            .map(|idx| Statement(idx as u32))
    }

    pub fn contains(&self, s: Statement) -> bool {
        s.id() < self.keys.len()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn label(&self, s: Statement) -> &str {
        &self.keys.get_index(s.id()).expect("statement interned").0
    }

    pub fn args(&self, s: Statement) -> &[i32] {
        &self.keys.get_index(s.id()).expect("statement interned").1
    }

    pub fn statements(&self) -> impl Iterator<Item = Statement> + '_ {
        (0..self.keys.len()).map(|i| Statement(i as u32))
    }

    /// Human-readable form, e.g. `path(2)`; zero-argument statements print as
    /// the bare label. Arguments of a statement labelled `context` are
    /// resolved as nested statement ids.
    pub fn display(&self, s: Statement) -> String {
        self.display_depth(s, 0)
    }

    fn display_depth(&self, s: Statement, depth: usize) -> String {
        let label = self.label(s);
        let args = self.args(s);
        if args.is_empty() {
            return label.to_string();
        }
        if label == "context" && args.len() == 1 && depth < 4 {
            let inner = args[0];
            if inner >= 0 && (inner as usize) < self.len() {
                return format!(
                    "context({})",
                    self.display_depth(Statement(inner as u32), depth + 1)
                );
            }
        }
        let parts: Vec<String> = args.iter().map(|a| a.to_string()).collect();
        format!("{}({})", label, parts.join(","))
    }
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry").field("len", &self.len()).finish()
    }
}

// FxHash-like mixing; the default SipHash shows up in profiles of implicit runs.
#[derive(Clone, Default)]
struct BuildKeyHasher;

impl std::hash::BuildHasher for BuildKeyHasher {
    type Hasher = KeyHasher;
    fn build_hasher(&self) -> KeyHasher {
        KeyHasher(0)
    }
}

struct KeyHasher(u64);

impl Hasher for KeyHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        const SEED: u64 = 0x51_7c_c1_b7_27_22_0a_95;
        for &b in bytes {
            self.0 = (self.0.rotate_left(5) ^ b as u64).wrapping_mul(SEED);
        }
    }

    fn write_i32(&mut self, v: i32) {
        self.write_u64(v as u32 as u64);
    }

    fn write_u64(&mut self, v: u64) {
        const SEED: u64 = 0x51_7c_c1_b7_27_22_0a_95;
        self.0 = (self.0.rotate_left(5) ^ v).wrapping_mul(SEED);
    }

    fn write_usize(&mut self, v: usize) {
        self.write_u64(v as u64);
    }
}
