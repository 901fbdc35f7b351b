//! The two selection state machines: which maneuver a vehicle executes and
//! which role it holds. Both are pure functions of (state, event).

use thiserror::Error;

use crate::types::{FaultKind, Maneuver, Role, VehicleId};

/// Event that may move a vehicle out of (or back into) the platooning state.
#[derive(Debug, Clone, PartialEq)]
pub enum ManeuverTrigger {
    /// Instruction from the cloud layer naming the maneuver to run.
    CloudInstruction(Maneuver),
    /// An obstacle appeared in lane and met the TTC condition. `at_head` is
    /// true when the detecting vehicle is the leader.
    ObstacleTtc { at_head: bool },
    /// A vehicle cut in without meeting the TTC condition.
    ObstacleCutIn,
    /// Own fault, a received FaultFlag, or a silent peer.
    HardwareFault { vehicle: VehicleId, kind: FaultKind },
    /// Another platoon member broadcast its maneuver selection.
    PeerAnnounce(Maneuver),
    Completed,
}

/// Completed maneuver outcome that may change the role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RoleCause {
    /// Initialization picks the leader.
    Appointed,
    JoinCompleted,
    LeaveCompleted,
    AebCompleted,
    TakeoverCompleted,
}

impl RoleCause {
    pub const ALL: [RoleCause; 5] = [
        RoleCause::Appointed,
        RoleCause::JoinCompleted,
        RoleCause::LeaveCompleted,
        RoleCause::AebCompleted,
        RoleCause::TakeoverCompleted,
    ];

    /// The cause a completed maneuver contributes to role selection.
    pub fn for_maneuver(maneuver: &Maneuver) -> Option<RoleCause> {
        match maneuver {
            Maneuver::JoinTail | Maneuver::JoinMiddle => Some(RoleCause::JoinCompleted),
            Maneuver::LeaveTail | Maneuver::LeaveMiddle => Some(RoleCause::LeaveCompleted),
            Maneuver::AebHead | Maneuver::AebMiddle => Some(RoleCause::AebCompleted),
            Maneuver::HardwareFailures => Some(RoleCause::TakeoverCompleted),
            Maneuver::Platooning | Maneuver::CutIn | Maneuver::Extension(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransitionError {
    #[error("illegal maneuver transition from {from} on {trigger:?}")]
    IllegalManeuver { from: Maneuver, trigger: ManeuverTrigger },
    #[error("illegal role transition from {from} on {cause:?}")]
    IllegalRole { from: Role, cause: RoleCause },
}

/// Role selection. Only the solid edges are implemented; the edges drawn for
/// completeness (follower promoted by a split, leader joining another
/// platoon) are rejected.
pub fn role_transition(current: Role, cause: RoleCause) -> Result<Role, TransitionError> {
    use Role::*;
    use RoleCause::*;
    match (current, cause) {
        (FreeVehicle, Appointed) => Ok(Leader),
        (FreeVehicle, JoinCompleted) => Ok(Follower),
        (Follower, LeaveCompleted | AebCompleted | TakeoverCompleted) => Ok(FreeVehicle),
        (Leader, LeaveCompleted) => Ok(FreeVehicle),
        (from, cause) => Err(TransitionError::IllegalRole { from, cause }),
    }
}

/// Maneuver selection. From platooning every trigger leads to the mandated
/// maneuver; once in a maneuver only `Completed` (back to platooning) and a
/// hardware fault (safety preemption) are accepted.
pub fn maneuver_transition(
    current: &Maneuver,
    trigger: &ManeuverTrigger,
) -> Result<Maneuver, TransitionError> {
    let illegal = || TransitionError::IllegalManeuver {
        from: current.clone(),
        trigger: trigger.clone(),
    };
    match trigger {
        ManeuverTrigger::HardwareFault { .. } => Ok(Maneuver::HardwareFailures),
        ManeuverTrigger::Completed => {
            if current.is_platooning() {
                Err(illegal())
            } else {
                Ok(Maneuver::Platooning)
            }
        }
        _ if !current.is_platooning() => Err(illegal()),
        ManeuverTrigger::CloudInstruction(m) => match m {
            Maneuver::JoinTail
            | Maneuver::JoinMiddle
            | Maneuver::LeaveTail
            | Maneuver::LeaveMiddle
            | Maneuver::Extension(_) => Ok(m.clone()),
            _ => Err(illegal()),
        },
        ManeuverTrigger::ObstacleTtc { at_head: true } => Ok(Maneuver::AebHead),
        ManeuverTrigger::ObstacleTtc { at_head: false } => Ok(Maneuver::AebMiddle),
        ManeuverTrigger::ObstacleCutIn => Ok(Maneuver::CutIn),
        ManeuverTrigger::PeerAnnounce(m) => {
            if m.is_platooning() {
                Err(illegal())
            } else {
                Ok(m.clone())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triggers() -> Vec<ManeuverTrigger> {
        let mut out = vec![
            ManeuverTrigger::ObstacleTtc { at_head: true },
            ManeuverTrigger::ObstacleTtc { at_head: false },
            ManeuverTrigger::ObstacleCutIn,
            ManeuverTrigger::HardwareFault {
                vehicle: VehicleId(3),
                kind: FaultKind::RadarFail,
            },
            ManeuverTrigger::HardwareFault {
                vehicle: VehicleId(3),
                kind: FaultKind::V2VFail,
            },
            ManeuverTrigger::Completed,
        ];
        for m in all_maneuvers() {
            out.push(ManeuverTrigger::CloudInstruction(m.clone()));
            out.push(ManeuverTrigger::PeerAnnounce(m));
        }
        out
    }

    fn all_maneuvers() -> Vec<Maneuver> {
        let mut v = Maneuver::BUILT_IN.to_vec();
        v.push(Maneuver::Extension("Split-stub".into()));
        v
    }

    #[test]
    fn join_edges() {
        assert_eq!(
            role_transition(Role::FreeVehicle, RoleCause::JoinCompleted),
            Ok(Role::Follower)
        );
        assert_eq!(
            role_transition(Role::Follower, RoleCause::TakeoverCompleted),
            Ok(Role::FreeVehicle)
        );
        assert!(matches!(
            role_transition(Role::Leader, RoleCause::JoinCompleted),
            Err(TransitionError::IllegalRole { .. })
        ));
    }

    #[test]
    fn dashed_role_edges_are_rejected() {
        // No cause ever promotes a follower or demotes a leader to follower.
        for cause in RoleCause::ALL {
            assert_ne!(role_transition(Role::Follower, cause), Ok(Role::Leader));
            assert_ne!(role_transition(Role::Leader, cause), Ok(Role::Follower));
        }
    }

    #[test]
    fn instruction_starts_and_completion_ends_a_maneuver() {
        let m = maneuver_transition(
            &Maneuver::Platooning,
            &ManeuverTrigger::CloudInstruction(Maneuver::JoinTail),
        )
        .unwrap();
        assert_eq!(m, Maneuver::JoinTail);
        assert_eq!(
            maneuver_transition(&m, &ManeuverTrigger::Completed),
            Ok(Maneuver::Platooning)
        );
    }

    #[test]
    fn busy_maneuver_rejects_instruction() {
        let r = maneuver_transition(
            &Maneuver::CutIn,
            &ManeuverTrigger::CloudInstruction(Maneuver::JoinTail),
        );
        assert!(matches!(r, Err(TransitionError::IllegalManeuver { .. })));
    }

    #[test]
    fn exhaustive_maneuver_table() {
        // Reference table written independently of the match above.
        for from in all_maneuvers() {
            for trig in triggers() {
                let got = maneuver_transition(&from, &trig);
                let expected: Option<Maneuver> = match (&from, &trig) {
                    (_, ManeuverTrigger::HardwareFault { .. }) => Some(Maneuver::HardwareFailures),
                    (Maneuver::Platooning, ManeuverTrigger::Completed) => None,
                    (_, ManeuverTrigger::Completed) => Some(Maneuver::Platooning),
                    (Maneuver::Platooning, ManeuverTrigger::CloudInstruction(m)) => {
                        let allowed = matches!(
                            m,
                            Maneuver::JoinTail
                                | Maneuver::JoinMiddle
                                | Maneuver::LeaveTail
                                | Maneuver::LeaveMiddle
                                | Maneuver::Extension(_)
                        );
                        allowed.then(|| m.clone())
                    }
                    (Maneuver::Platooning, ManeuverTrigger::PeerAnnounce(m)) => {
                        (!m.is_platooning()).then(|| m.clone())
                    }
                    (Maneuver::Platooning, ManeuverTrigger::ObstacleTtc { at_head }) => Some(if *at_head {
                        Maneuver::AebHead
                    } else {
                        Maneuver::AebMiddle
                    }),
                    (Maneuver::Platooning, ManeuverTrigger::ObstacleCutIn) => Some(Maneuver::CutIn),
                    _ => None,
                };
                match expected {
                    Some(m) => assert_eq!(got, Ok(m), "{from:?} {trig:?}"),
                    None => assert!(got.is_err(), "{from:?} {trig:?} -> {got:?}"),
                }
            }
        }
    }

    #[test]
    fn every_maneuver_can_return_to_platooning() {
        for m in all_maneuvers().into_iter().filter(|m| !m.is_platooning()) {
            assert_eq!(
                maneuver_transition(&m, &ManeuverTrigger::Completed),
                Ok(Maneuver::Platooning)
            );
        }
    }
}
