use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::strategies;
use super::{StrategyContext, StrategyError, StrategyOutput, StrategyProgress};
use crate::types::{Maneuver, Role};

/// One cell of the maneuver × role table.
pub trait Strategy: Send + Sync {
    fn step(
        &self,
        ctx: &StrategyContext,
        progress: &mut StrategyProgress,
    ) -> Result<StrategyOutput, StrategyError>;
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct StrategyKey {
    pub maneuver: Maneuver,
    pub role: Role,
}

impl StrategyKey {
    pub fn new(maneuver: Maneuver, role: Role) -> Self {
        Self { maneuver, role }
    }
}

impl fmt::Display for StrategyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.maneuver, self.role)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("a strategy is already registered for {0}")]
    DuplicateKey(StrategyKey),
}

#[derive(Default)]
pub struct StrategyRegistry {
    table: BTreeMap<StrategyKey, Box<dyn Strategy>>,
}

impl fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.table.keys()).finish()
    }
}

impl StrategyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        key: StrategyKey,
        strategy: Box<dyn Strategy>,
    ) -> Result<(), RegistryError> {
        if self.table.contains_key(&key) {
            return Err(RegistryError::DuplicateKey(key));
        }
        self.table.insert(key, strategy);
        Ok(())
    }

    pub fn lookup(&self, key: &StrategyKey) -> Option<&dyn Strategy> {
        self.table.get(key).map(|b| b.as_ref())
    }

    pub fn unregister(&mut self, key: &StrategyKey) -> Option<Box<dyn Strategy>> {
        self.table.remove(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &StrategyKey> {
        self.table.keys()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// Registry holding every built-in strategy.
pub fn default_registry() -> StrategyRegistry {
    use strategies::*;
    use Maneuver::*;
    use Role::*;

    let entries: Vec<(Maneuver, Role, Box<dyn Strategy>)> = vec![
        (Platooning, Leader, Box::new(Steady)),
        (Platooning, Follower, Box::new(Steady)),
        (Platooning, FreeVehicle, Box::new(FreeDriving)),
        (JoinTail, FreeVehicle, Box::new(JoinTailFree)),
        (JoinTail, Leader, Box::new(JoinLeader)),
        (JoinMiddle, FreeVehicle, Box::new(JoinMiddleFree)),
        (JoinMiddle, Follower, Box::new(JoinMiddleEvader)),
        (JoinMiddle, Leader, Box::new(JoinLeader)),
        (AebHead, Leader, Box::new(AebHeadLeader)),
        (AebHead, Follower, Box::new(AebHeadFollower)),
        (AebMiddle, Leader, Box::new(AebMiddleLeader)),
        (AebMiddle, Follower, Box::new(AebMiddleFollower)),
        (CutIn, Leader, Box::new(CutInMember)),
        (CutIn, Follower, Box::new(CutInMember)),
        (LeaveTail, Follower, Box::new(LeaveFollower)),
        (LeaveTail, Leader, Box::new(LeaveLeader)),
        (LeaveMiddle, Follower, Box::new(LeaveFollower)),
        (LeaveMiddle, Leader, Box::new(LeaveLeader)),
        (HardwareFailures, Leader, Box::new(HardwareLeader)),
        (HardwareFailures, Follower, Box::new(HardwareFollower)),
        (HardwareFailures, FreeVehicle, Box::new(HardwareFree)),
    ];
    let mut registry = StrategyRegistry::new();
    for (maneuver, role, strategy) in entries {
        registry
            .register(StrategyKey::new(maneuver, role), strategy)
            .expect("built-in keys are distinct");
    }
    registry
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Nop;
    impl Strategy for Nop {
        fn step(
            &self,
            ctx: &StrategyContext,
            _: &mut StrategyProgress,
        ) -> Result<StrategyOutput, StrategyError> {
            Ok(StrategyOutput::hold(ctx.controller))
        }
    }

    #[test]
    fn register_then_lookup() {
        let mut r = StrategyRegistry::new();
        let key = StrategyKey::new(Maneuver::JoinTail, Role::FreeVehicle);
        r.register(key.clone(), Box::new(Nop)).unwrap();
        assert!(r.lookup(&key).is_some());
        assert_eq!(
            r.register(key.clone(), Box::new(Nop)),
            Err(RegistryError::DuplicateKey(key))
        );
    }

    #[test]
    fn unregister_leaves_other_keys() {
        let mut r = default_registry();
        let n = r.len();
        let key = StrategyKey::new(Maneuver::CutIn, Role::Follower);
        assert!(r.unregister(&key).is_some());
        assert_eq!(r.len(), n - 1);
        assert!(r.lookup(&key).is_none());
        assert!(r
            .lookup(&StrategyKey::new(Maneuver::CutIn, Role::Leader))
            .is_some());
    }

    #[test]
    fn every_built_in_maneuver_has_a_strategy() {
        let r = default_registry();
        for m in Maneuver::BUILT_IN {
            assert!(r.keys().any(|k| k.maneuver == m), "{m}");
        }
    }
}
