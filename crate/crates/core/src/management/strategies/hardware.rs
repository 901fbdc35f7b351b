use super::missing;
use crate::management::{
    DriverPlan, Phase, Strategy, StrategyContext, StrategyError, StrategyOutput, StrategyProgress,
};
use crate::types::{FaultKind, Longitudinal, MessageKind, Role};

/// Follower reacting to a device fault, its own or a member's ahead of it:
/// degrade to a controller that needs no data from the failed device and hand
/// over to the driver. Members ahead of the faulty vehicle carry on.
pub struct HardwareFollower;

impl Strategy for HardwareFollower {
    fn step(&self, ctx: &StrategyContext, progress: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        let (faulty, kind) = ctx
            .instance
            .and_then(|i| i.fault)
            .ok_or_else(|| missing("fault"))?;
        let own = faulty == ctx.ego.id;
        let degraded = |memo: Option<f64>| match (own, kind, memo) {
            (true, FaultKind::RadarFail, Some(v_set)) => Longitudinal::Cc { v_set },
            _ => Longitudinal::Acc,
        };
        if progress.phase == Phase::Start {
            let behind = ctx.platoon.is_some_and(|p| p.is_behind(ctx.ego.id, faulty));
            if !own && !behind {
                return Ok(StrategyOutput::hold(ctx.platooning_controller()).done());
            }
            progress.advance(Phase::WaitingTakeover, ctx.tick);
            let mut out = StrategyOutput::with(Longitudinal::Acc);
            if own && kind == FaultKind::RadarFail {
                progress.memo = Some(ctx.ego.v - ctx.params.radar_fault_speed_drop);
                out = out.send(ctx, MessageKind::FaultFlag(kind));
            }
            out.controller.longitudinal = match progress.memo {
                // Hold speed until the FaultFlag reaches the members behind.
                Some(_) => Longitudinal::Cc { v_set: ctx.ego.v },
                None => Longitudinal::Acc,
            };
            out.takeover_requested = true;
            return Ok(out.send(ctx, MessageKind::TakeoverRequest));
        }
        if ctx.seconds_since(progress.entered_tick) >= ctx.params.takeover_delay {
            let v = ctx.ego.v;
            let mut out = StrategyOutput::with(Longitudinal::Driver { v_des: v }).done();
            out.role_change = Some(Role::FreeVehicle);
            out.driver_plan = Some(DriverPlan::cruise(v));
            return Ok(out);
        }
        Ok(StrategyOutput::with(degraded(progress.memo)))
    }
}

/// Leader: keeps cruising and drops the faulty vehicle and everything behind
/// it once their drivers have taken over.
pub struct HardwareLeader;

impl Strategy for HardwareLeader {
    fn step(&self, ctx: &StrategyContext, progress: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        let (faulty, _) = ctx
            .instance
            .and_then(|i| i.fault)
            .ok_or_else(|| missing("fault"))?;
        let out = StrategyOutput::hold(ctx.platooning_controller());
        if faulty == ctx.ego.id {
            return Ok(out.done());
        }
        if ctx.seconds_since(progress.entered_tick) < ctx.params.takeover_delay {
            return Ok(out);
        }
        let mut p = ctx.platoon.cloned().ok_or_else(|| missing("platoon"))?;
        p.truncate_from(faulty);
        let mut out = out.send(ctx, MessageKind::UpdateFlag).done();
        out.platoon_update = Some(p);
        Ok(out)
    }
}

/// A free vehicle has nothing to degrade; its driver is already in charge.
pub struct HardwareFree;

impl Strategy for HardwareFree {
    fn step(&self, ctx: &StrategyContext, _: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        Ok(StrategyOutput::hold(ctx.platooning_controller()).done())
    }
}
