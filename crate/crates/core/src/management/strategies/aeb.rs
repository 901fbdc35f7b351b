use super::{capture_ranks, missing, ticks};
use crate::management::{
    DriverPlan, Phase, Strategy, StrategyContext, StrategyError, StrategyOutput, StrategyProgress,
};
use crate::types::{Longitudinal, MessageKind, PlatoonInfo, Role, VehicleId};

/// Restart plan handed to the driver after the all-clear: the `order`-th
/// vehicle starts `order` staggers later and asks to rejoin once up to speed.
fn restart_plan(ctx: &StrategyContext, order: usize) -> DriverPlan {
    let p = ctx.params;
    DriverPlan {
        v_des: p.restart_speed,
        start_tick: ctx.tick + ticks(order as f64 * p.restart_stagger, ctx.dt),
        rejoin: true,
        join_requested: false,
    }
}

/// Brake to standstill, then hold still until the driver restarts.
fn braking_controller(ctx: &StrategyContext, progress: &mut StrategyProgress) -> Longitudinal {
    if ctx.ego.v > 0.0 && progress.phase != Phase::Standstill {
        progress.phase = Phase::Braking;
        Longitudinal::Aeb
    } else {
        if progress.phase != Phase::Standstill {
            progress.advance(Phase::Standstill, ctx.tick);
        }
        Longitudinal::Driver { v_des: 0.0 }
    }
}

/// Stopped member leaving the platoon once the leader publishes the update.
fn release(ctx: &StrategyContext, progress: &StrategyProgress, leader: Option<VehicleId>, out: StrategyOutput) -> StrategyOutput {
    if leader.is_some() && ctx.received(leader, |k| *k == MessageKind::UpdateFlag) {
        let mut out = out.done();
        out.role_change = Some(Role::FreeVehicle);
        out.driver_plan = Some(progress.plan.unwrap_or(DriverPlan::cruise(0.0)));
        return out;
    }
    out
}

/// Leader that saw an obstacle within the TTC threshold: brake until the
/// obstacle is gone, then give the all-clear and dissolve the platoon.
pub struct AebHeadLeader;

impl Strategy for AebHeadLeader {
    fn step(&self, ctx: &StrategyContext, _: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        if ctx.obstacle.is_some() {
            return Ok(StrategyOutput::with(Longitudinal::Aeb));
        }
        let mut out = StrategyOutput::hold(ctx.platooning_controller())
            .send(ctx, MessageKind::SafeFlag)
            .send(ctx, MessageKind::UpdateFlag)
            .done();
        out.platoon_update = Some(PlatoonInfo::solo(ctx.ego.id));
        Ok(out)
    }
}

/// Follower braking with the leader; restarted by its driver after the
/// all-clear and released as a free vehicle.
pub struct AebHeadFollower;

impl Strategy for AebHeadFollower {
    fn step(&self, ctx: &StrategyContext, progress: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        capture_ranks(ctx, progress);
        let leader = ctx.origin();
        if progress.plan.is_none() && ctx.received(leader, |k| *k == MessageKind::SafeFlag) {
            progress.plan = Some(restart_plan(ctx, progress.rank.unwrap_or(1)));
        }
        let out = StrategyOutput::with(braking_controller(ctx, progress));
        Ok(release(ctx, progress, leader, out))
    }
}

/// Leader slowing down while part of its platoon performs an emergency stop;
/// drops the stopped vehicles after the all-clear.
pub struct AebMiddleLeader;

impl Strategy for AebMiddleLeader {
    fn step(&self, ctx: &StrategyContext, _: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        let origin = ctx.origin().ok_or_else(|| missing("detecting vehicle"))?;
        if ctx.received(Some(origin), |k| *k == MessageKind::SafeFlag) {
            let mut p = ctx.platoon.cloned().unwrap_or_else(|| PlatoonInfo::solo(ctx.ego.id));
            p.truncate_from(origin);
            let mut out = StrategyOutput::hold(ctx.platooning_controller())
                .send(ctx, MessageKind::UpdateFlag)
                .done();
            out.platoon_update = Some(p);
            return Ok(out);
        }
        Ok(StrategyOutput::with(Longitudinal::Cc {
            v_set: ctx.params.aeb_wait_speed,
        }))
    }
}

/// Follower during an emergency stop in the middle of the platoon. The
/// detecting vehicle and everything behind it brake to standstill; the
/// followers ahead slow down with the leader.
pub struct AebMiddleFollower;

impl Strategy for AebMiddleFollower {
    fn step(&self, ctx: &StrategyContext, progress: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        capture_ranks(ctx, progress);
        let origin = ctx.origin().ok_or_else(|| missing("detecting vehicle"))?;
        let (rank, origin_rank) = (progress.rank.unwrap_or(0), progress.origin_rank.unwrap_or(0));
        let detector = origin == ctx.ego.id;
        if !detector && rank < origin_rank {
            if ctx.received(Some(origin), |k| *k == MessageKind::SafeFlag) {
                return Ok(StrategyOutput::hold(ctx.platooning_controller()).done());
            }
            return Ok(StrategyOutput::with(Longitudinal::Cc {
                v_set: ctx.params.aeb_wait_speed,
            }));
        }
        let order = rank.saturating_sub(origin_rank) + 1;
        let mut out = StrategyOutput::with(braking_controller(ctx, progress));
        if progress.plan.is_none() {
            if detector && ctx.obstacle.is_none() {
                progress.plan = Some(restart_plan(ctx, order));
                out = out.send(ctx, MessageKind::SafeFlag);
            } else if !detector && ctx.received(Some(origin), |k| *k == MessageKind::SafeFlag) {
                progress.plan = Some(restart_plan(ctx, order));
            }
        }
        Ok(release(ctx, progress, ctx.leader(), out))
    }
}
