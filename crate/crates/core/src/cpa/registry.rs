use std::collections::BTreeMap;

use thiserror::Error;

use super::{compose, CompositeCpa, CompositionError, DynCpa};
use crate::config::Config;
use crate::domains;
use crate::frontend::ProgramRef;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("an analysis named `{0}` is already registered")]
    Duplicate(String),
    #[error("unknown analysis `{0}`")]
    Unknown(String),
    #[error("cannot build `{name}`: {message}")]
    Factory { name: String, message: String },
    #[error(transparent)]
    Composition(#[from] CompositionError),
}

/// What a factory gets to build its analysis from.
pub struct CpaContext<'a> {
    pub program: &'a ProgramRef,
    pub config: &'a Config,
}

pub type CpaFactory = Box<dyn Fn(&CpaContext) -> Result<Box<dyn DynCpa>, String> + Send + Sync>;

/// Name → factory table consulted when a configuration lists analyses.
pub struct CpaRegistry {
    factories: BTreeMap<String, (CpaFactory, bool)>,
}

pub(crate) const BUILTIN: [&str; 5] = ["location", "callstack", "explicit", "octagon", "predicate"];

impl CpaRegistry {
    pub fn empty() -> Self {
        CpaRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// Registry with the bundled analyses.
    pub fn with_defaults() -> Self {
        let mut r = CpaRegistry::empty();
        for name in BUILTIN {
            let f: CpaFactory = Box::new(move |ctx| domains::build_builtin(name, ctx));
            r.factories.insert(name.to_string(), (f, true));
        }
        r
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        factory: impl Fn(&CpaContext) -> Result<Box<dyn DynCpa>, String> + Send + Sync + 'static,
    ) -> Result<(), RegistryError> {
        let name = name.into();
        if self.factories.contains_key(&name) {
            return Err(RegistryError::Duplicate(name));
        }
        self.factories.insert(name, (Box::new(factory), false));
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn is_builtin(&self, name: &str) -> bool {
        self.factories.get(name).is_some_and(|(_, b)| *b)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, ctx: &CpaContext) -> Result<Box<dyn DynCpa>, RegistryError> {
        let (factory, _) = self
            .factories
            .get(name)
            .ok_or_else(|| RegistryError::Unknown(name.to_string()))?;
        factory(ctx).map_err(|message| RegistryError::Factory {
            name: name.to_string(),
            message,
        })
    }

    /// Builds and composes the analyses listed in `config.cpas`.
    pub fn build_composite(&self, program: &ProgramRef, config: &Config) -> Result<CompositeCpa, RegistryError> {
        let ctx = CpaContext { program, config };
        let parts = config
            .cpas
            .iter()
            .map(|n| self.build(n, &ctx))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(compose(parts)?)
    }
}

impl Default for CpaRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}
