use super::missing;
use crate::management::{Phase, Strategy, StrategyContext, StrategyError, StrategyOutput, StrategyProgress};
use crate::types::{ControllerKind, Lateral, Longitudinal, MessageKind, PlatoonInfo, Role};

fn cacc(front: crate::types::VehicleId, virtual_gap: bool) -> Longitudinal {
    Longitudinal::Cacc { front, virtual_gap }
}

/// Free vehicle joining at the tail: close in on ACC, announce at the join
/// gap, become a follower on the leader's update.
pub struct JoinTailFree;

impl Strategy for JoinTailFree {
    fn step(&self, ctx: &StrategyContext, progress: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        let instr = ctx.instruction().ok_or_else(|| missing("join instruction"))?;
        match progress.phase {
            Phase::Start | Phase::WaitingGap => {
                progress.advance(Phase::WaitingGap, ctx.tick);
                let tail = ctx
                    .peers
                    .get(&instr.leader)
                    .and_then(|p| p.platoon.as_ref())
                    .and_then(PlatoonInfo::tail);
                let r = &ctx.radar;
                let on_tail = r.target.is_some() && (tail.is_none() || r.target == tail);
                if r.valid && on_tail && r.gap <= ctx.params.evade_gap {
                    progress.target = r.target;
                    progress.advance(Phase::WaitingUpdateFlag, ctx.tick);
                    return Ok(StrategyOutput::with(Longitudinal::Acc).send(ctx, MessageKind::JoinFlag));
                }
                Ok(StrategyOutput::with(Longitudinal::Acc))
            }
            _ => {
                if ctx.received(Some(instr.leader), |k| *k == MessageKind::UpdateFlag) {
                    let front = progress.target.ok_or_else(|| missing("join target"))?;
                    let mut out = StrategyOutput::with(cacc(front, false)).done();
                    out.role_change = Some(Role::Follower);
                    return Ok(out);
                }
                Ok(StrategyOutput::with(Longitudinal::Acc))
            }
        }
    }
}

/// Leader side of both joins: admit the instructed joiner on its JoinFlag.
pub struct JoinLeader;

impl Strategy for JoinLeader {
    fn step(&self, ctx: &StrategyContext, _: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        let flags = ctx.senders_of(|k| *k == MessageKind::JoinFlag);
        let Some(instr) = ctx.instruction() else {
            return match flags.first() {
                Some(&sender) => Err(StrategyError::UnknownJoiner { sender }),
                None => Err(missing("join instruction")),
            };
        };
        if let Some(&sender) = flags.iter().find(|&&s| s != instr.target) {
            return Err(StrategyError::UnknownJoiner { sender });
        }
        let out = StrategyOutput::hold(ctx.platooning_controller());
        if flags.is_empty() {
            return Ok(out);
        }
        let mut p = ctx.platoon.cloned().unwrap_or_else(|| PlatoonInfo::solo(ctx.ego.id));
        let inserted = instr.before.is_some_and(|b| p.insert_before(instr.target, b));
        if !inserted {
            p.append(instr.target);
        }
        let mut out = out.send(ctx, MessageKind::UpdateFlag).done();
        out.platoon_update = Some(p);
        Ok(out)
    }
}

/// Follower making room for a middle joiner: slow down until the gap ahead
/// opens, signal, then follow the joiner once it is in lane.
pub struct JoinMiddleEvader;

impl Strategy for JoinMiddleEvader {
    fn step(&self, ctx: &StrategyContext, progress: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        let instr = ctx.instruction().ok_or_else(|| missing("join instruction"))?;
        if instr.before != Some(ctx.ego.id) {
            return Ok(StrategyOutput::hold(ctx.platooning_controller()).done());
        }
        let p = ctx.params;
        match progress.phase {
            Phase::Start | Phase::WaitingGap => {
                progress.advance(Phase::WaitingGap, ctx.tick);
                if ctx.radar.valid && ctx.radar.gap >= p.evade_gap {
                    progress.advance(Phase::WaitingJoinFlag, ctx.tick);
                    return Ok(StrategyOutput::with(Longitudinal::Cc { v_set: p.platoon_speed })
                        .send(ctx, MessageKind::EvadeFlag));
                }
                Ok(StrategyOutput::with(Longitudinal::Cc { v_set: p.evade_speed }))
            }
            _ => {
                if ctx.received(Some(instr.target), |k| *k == MessageKind::JoinFlag) {
                    return Ok(StrategyOutput::with(cacc(instr.target, false)).done());
                }
                Ok(StrategyOutput::with(Longitudinal::Cc { v_set: p.platoon_speed }))
            }
        }
    }
}

/// Free vehicle joining in the middle: line up beside the slot on a virtual
/// gap, change lane once the slot is open, then announce.
pub struct JoinMiddleFree;

impl Strategy for JoinMiddleFree {
    fn step(&self, ctx: &StrategyContext, progress: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        let instr = ctx.instruction().ok_or_else(|| missing("join instruction"))?;
        let front = instr.front.ok_or_else(|| missing("slot front"))?;
        let view = ctx.peers.get(&front).ok_or_else(|| missing("front heartbeat"))?;
        let aligned = ControllerKind::longitudinal(cacc(front, true));
        match progress.phase {
            Phase::Start | Phase::WaitingEvadeFlag => {
                progress.advance(Phase::WaitingEvadeFlag, ctx.tick);
                if ctx.received(instr.before, |k| *k == MessageKind::EvadeFlag) {
                    progress.advance(Phase::WaitingSlot, ctx.tick);
                }
                Ok(StrategyOutput::hold(aligned))
            }
            Phase::WaitingSlot => {
                let lane = view.state.lane;
                let gap = view.state.rear() - ctx.ego.s;
                let desired = ctx.spacing.desired_gap(ctx.spacing.h_base, ctx.ego.v);
                let in_slot = (gap - desired).abs() <= ctx.params.slot_tolerance;
                if in_slot && lane.abs_diff(ctx.ego.lane) == 1 && ctx.clear_lanes.contains(&lane) {
                    progress.lane = Some(lane);
                    progress.advance(Phase::ChangingLane, ctx.tick);
                    return Ok(StrategyOutput::hold(ControllerKind {
                        lateral: Lateral::LaneChange { target_lane: lane },
                        ..aligned
                    }));
                }
                Ok(StrategyOutput::hold(aligned))
            }
            Phase::ChangingLane => {
                let lane = progress.lane.ok_or_else(|| missing("target lane"))?;
                if ctx.ego.lane == lane && ctx.ego.lateral_offset == 0.0 {
                    progress.advance(Phase::WaitingUpdateFlag, ctx.tick);
                    return Ok(StrategyOutput::with(cacc(front, false)).send(ctx, MessageKind::JoinFlag));
                }
                Ok(StrategyOutput::hold(ControllerKind {
                    lateral: Lateral::LaneChange { target_lane: lane },
                    ..aligned
                }))
            }
            _ => {
                let out = StrategyOutput::with(cacc(front, false));
                if ctx.received(Some(instr.leader), |k| *k == MessageKind::UpdateFlag) {
                    let mut out = out.done();
                    out.role_change = Some(Role::Follower);
                    return Ok(out);
                }
                Ok(out)
            }
        }
    }
}
