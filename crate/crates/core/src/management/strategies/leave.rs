use super::missing;
use crate::management::{
    DriverPlan, Phase, Strategy, StrategyContext, StrategyError, StrategyOutput, StrategyProgress,
};
use crate::types::{ControllerKind, Lateral, Longitudinal, Maneuver, MessageKind, Role};

/// Follower side of both leaves: the leaver changes lane and turns free, the
/// member behind a middle leaver first opens a gap.
pub struct LeaveFollower;

impl Strategy for LeaveFollower {
    fn step(&self, ctx: &StrategyContext, progress: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        let instr = ctx.instruction().ok_or_else(|| missing("leave instruction"))?;
        let p = ctx.params;
        let cruise = Longitudinal::Cc { v_set: p.platoon_speed };
        if instr.target == ctx.ego.id {
            if progress.phase == Phase::Start {
                let next = if *ctx.maneuver == Maneuver::LeaveMiddle {
                    Phase::WaitingEvadeFlag
                } else {
                    Phase::WaitingSlot
                };
                progress.advance(next, ctx.tick);
            }
            if progress.phase == Phase::WaitingEvadeFlag {
                if !ctx.received(instr.behind, |k| *k == MessageKind::EvadeFlag) {
                    return Ok(StrategyOutput::hold(ctx.platooning_controller()));
                }
                progress.advance(Phase::WaitingSlot, ctx.tick);
            }
            if progress.phase == Phase::WaitingSlot {
                match ctx.exit_lane() {
                    Some(lane) => {
                        progress.lane = Some(lane);
                        progress.advance(Phase::ChangingLane, ctx.tick);
                    }
                    None => return Ok(StrategyOutput::hold(ctx.platooning_controller())),
                }
            }
            let lane = progress.lane.ok_or_else(|| missing("exit lane"))?;
            if ctx.ego.lane == lane && ctx.ego.lateral_offset == 0.0 {
                let mut out = StrategyOutput::with(Longitudinal::Driver { v_des: p.leave_speed })
                    .send(ctx, MessageKind::LeaveFlag)
                    .done();
                out.role_change = Some(Role::FreeVehicle);
                out.driver_plan = Some(DriverPlan::cruise(p.leave_speed));
                return Ok(out);
            }
            return Ok(StrategyOutput::hold(ControllerKind {
                longitudinal: cruise,
                lateral: Lateral::LaneChange { target_lane: lane },
            }));
        }
        if instr.behind != Some(ctx.ego.id) {
            return Ok(StrategyOutput::hold(ctx.platooning_controller()).done());
        }
        match progress.phase {
            Phase::Start | Phase::WaitingGap => {
                progress.advance(Phase::WaitingGap, ctx.tick);
                if ctx.radar.valid && ctx.radar.gap >= p.evade_gap {
                    progress.advance(Phase::WaitingUpdateFlag, ctx.tick);
                    return Ok(StrategyOutput::with(cruise).send(ctx, MessageKind::EvadeFlag));
                }
                Ok(StrategyOutput::with(Longitudinal::Cc { v_set: p.evade_speed }))
            }
            _ => {
                if ctx.received(Some(instr.leader), |k| *k == MessageKind::UpdateFlag) {
                    return Ok(StrategyOutput::hold(ctx.platooning_controller()).done());
                }
                Ok(StrategyOutput::with(cruise))
            }
        }
    }
}

/// Leader side of both leaves: prune the leaver on its LeaveFlag.
pub struct LeaveLeader;

impl Strategy for LeaveLeader {
    fn step(&self, ctx: &StrategyContext, _: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        let instr = ctx.instruction().ok_or_else(|| missing("leave instruction"))?;
        let out = StrategyOutput::hold(ctx.platooning_controller());
        if !ctx.received(Some(instr.target), |k| *k == MessageKind::LeaveFlag) {
            return Ok(out);
        }
        let mut platoon = ctx.platoon.cloned().ok_or_else(|| missing("platoon"))?;
        platoon.remove(instr.target);
        let mut out = out.send(ctx, MessageKind::UpdateFlag).done();
        out.platoon_update = Some(platoon);
        Ok(out)
    }
}
