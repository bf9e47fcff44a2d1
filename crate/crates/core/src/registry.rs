//! Name-keyed factories for interchangeable strategies.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

type Factory<P, A> = Box<dyn Fn(A) -> Result<Box<P>> + Send + Sync>;

struct Entry<P: ?Sized, A> {
    summary: &'static str,
    factory: Factory<P, A>,
}

/// Maps names to constructors of boxed trait objects. `A` is whatever the
/// constructor needs (nothing for propagators, a parameter tree for presets).
pub struct Registry<P: ?Sized, A = ()> {
    kind: &'static str,
    entries: BTreeMap<String, Entry<P, A>>,
}

impl<P: ?Sized, A> Registry<P, A> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn register<F>(&mut self, name: &str, summary: &'static str, factory: F)
    where
        F: Fn(A) -> Result<Box<P>> + Send + Sync + 'static,
    {
        self.entries.insert(
            name.to_string(),
            Entry {
                summary,
                factory: Box::new(factory),
            },
        );
    }

    pub fn create(&self, name: &str, args: A) -> Result<Box<P>> {
        match self.entries.get(name) {
            Some(entry) => (entry.factory)(args),
            None => Err(Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            }),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    /// `(name, summary)` pairs in name order.
    pub fn describe(&self) -> Vec<(&str, &'static str)> {
        self.entries
            .iter()
            .map(|(name, e)| (name.as_str(), e.summary))
            .collect()
    }
}

impl<P: ?Sized, A> fmt::Debug for Registry<P, A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.names())
            .finish()
    }
}
