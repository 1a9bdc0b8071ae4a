//! Turning resolved config values into core objects.

use mvsde_core::coefficients::{
    ConcaveModulus, DiffusionKernel, DriftKernel, JumpKernel, KernelCoefficients, PerturbationDirection,
    PerturbationFamily, PerturbationRate,
};
use mvsde_core::f64::{Domain, JumpModel, Matrix, Problem, TimeGrid};
use mvsde_core::jumps::Bounds;

use crate::config::Resolver;
use crate::error::CliError;

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {msg}"))
}

fn dim_vector(r: &mut Resolver, key: &str, d: usize) -> Result<Vec<f64>, CliError> {
    let v = r.vector(key)?;
    if v.len() != d {
        return Err(bad(key, format!("expected {d} values, got {}", v.len())));
    }
    Ok(v)
}

fn dim_matrix(r: &mut Resolver, key: &str, d: usize) -> Result<Matrix, CliError> {
    let rows = r.matrix(key)?;
    if rows.len() != d || rows.iter().any(|row| row.len() != d) {
        return Err(bad(key, format!("expected a {d}x{d} matrix")));
    }
    Ok(Matrix::from_rows(&rows)?)
}

fn args_exact(key: &str, args: &[f64], n: usize) -> Result<(), CliError> {
    if args.len() != n {
        return Err(bad(key, format!("expected {n} numeric arguments, got {}", args.len())));
    }
    Ok(())
}

pub fn grid(r: &mut Resolver) -> Result<TimeGrid, CliError> {
    let t: f64 = r.parse("run.t_end")?;
    let dt: f64 = r.parse("run.dt")?;
    Ok(TimeGrid::from_step(t, dt)?)
}

pub fn domain(r: &mut Resolver, d: usize) -> Result<Domain, CliError> {
    let kind = r.require("problem.domain")?;
    Ok(match kind.as_str() {
        "whole" => Domain::whole_space(d)?,
        "box" => Domain::boxed(
            dim_vector(r, "problem.domain.lo", d)?,
            dim_vector(r, "problem.domain.hi", d)?,
        )?,
        "ball" => Domain::ball(
            dim_vector(r, "problem.domain.center", d)?,
            r.parse("problem.domain.radius")?,
        )?,
        "polyhedron" => {
            let normals = r.matrix("problem.domain.normals")?;
            let offsets = r.vector("problem.domain.offsets")?;
            let interior = dim_vector(r, "problem.domain.interior", d)?;
            Domain::polyhedron(normals, offsets, interior)?
        }
        other => return Err(bad("problem.domain", format!("unknown domain `{other}`"))),
    })
}

fn drift(r: &mut Resolver, d: usize) -> Result<DriftKernel<f64>, CliError> {
    let kind = r.require("problem.drift")?;
    Ok(match kind.as_str() {
        "zero" => DriftKernel::Zero,
        "constant" => DriftKernel::Constant(dim_vector(r, "problem.drift.value", d)?),
        "mean_field_ou" => DriftKernel::MeanFieldOu {
            alpha: r.parse("problem.drift.alpha")?,
            beta: r.parse("problem.drift.beta")?,
        },
        "affine" => DriftKernel::Affine {
            x_coef: dim_matrix(r, "problem.drift.x_coef", d)?,
            y_coef: dim_matrix(r, "problem.drift.y_coef", d)?,
            offset: dim_vector(r, "problem.drift.offset", d)?,
        },
        "sine" => DriftKernel::SineCoupling {
            amp: r.parse("problem.drift.amp")?,
            freq: r.parse("problem.drift.freq")?,
        },
        other => return Err(bad("problem.drift", format!("unknown drift `{other}`"))),
    })
}

fn diffusion(r: &mut Resolver, d: usize) -> Result<DiffusionKernel<f64>, CliError> {
    let kind = r.require("problem.diffusion")?;
    Ok(match kind.as_str() {
        "zero" => DiffusionKernel::Zero,
        "constant" => DiffusionKernel::Constant(dim_matrix(r, "problem.diffusion.matrix", d)?),
        "affine" => DiffusionKernel::Affine {
            base: dim_matrix(r, "problem.diffusion.base", d)?,
            x_diag: dim_vector(r, "problem.diffusion.x_diag", d)?,
            y_diag: dim_vector(r, "problem.diffusion.y_diag", d)?,
        },
        other => return Err(bad("problem.diffusion", format!("unknown diffusion `{other}`"))),
    })
}

fn jump(r: &mut Resolver, d: usize) -> Result<JumpKernel<f64>, CliError> {
    let kind = r.require("problem.jump")?;
    Ok(match kind.as_str() {
        "zero" => JumpKernel::Zero,
        "linear" => JumpKernel::Linear {
            c0: dim_vector(r, "problem.jump.c0", d)?,
            c1: r.parse("problem.jump.c1")?,
            c2: r.parse("problem.jump.c2")?,
        },
        other => return Err(bad("problem.jump", format!("unknown jump kernel `{other}`"))),
    })
}

fn marks(r: &mut Resolver) -> Result<Option<JumpModel>, CliError> {
    let kind = r.require("problem.marks")?;
    if kind == "none" {
        return Ok(None);
    }
    let gamma = r.vector("problem.marks.gamma")?;
    let mut bounds = Bounds::from_gamma(&gamma);
    for (key, slot) in [
        ("problem.marks.l1", &mut bounds.l1),
        ("problem.marks.l2", &mut bounds.l2),
        ("problem.marks.l3", &mut bounds.l3),
    ] {
        if r.has(key) {
            *slot = r.vector(key)?;
        }
    }
    Ok(Some(match kind.as_str() {
        "finite" => JumpModel::finite(
            r.vector("problem.marks.values")?,
            r.vector("problem.marks.weights")?,
            gamma,
            bounds,
        )?,
        "interval" => JumpModel::interval(
            r.parse("problem.marks.a")?,
            r.parse("problem.marks.b")?,
            r.vector("problem.marks.density")?,
            gamma,
            bounds,
        )?,
        other => return Err(bad("problem.marks", format!("unknown mark space `{other}`"))),
    }))
}

pub fn concave_modulus(key: &str, head: &str, args: &[f64]) -> Result<ConcaveModulus<f64>, CliError> {
    args_exact(key, args, 1)?;
    Ok(match head {
        "linear" => ConcaveModulus::linear(args[0])?,
        "log_cap" => ConcaveModulus::log_cap(args[0])?,
        other => return Err(bad(key, format!("unknown modulus `{other}`"))),
    })
}

fn rate(r: &mut Resolver, key: &str) -> Result<PerturbationRate<f64>, CliError> {
    let (head, args) = r.tagged(key)?;
    Ok(match head.as_str() {
        "zero" => {
            args_exact(key, &args, 0)?;
            PerturbationRate::Zero
        }
        "constant" => {
            args_exact(key, &args, 1)?;
            PerturbationRate::Constant(args[0])
        }
        "power" => {
            args_exact(key, &args, 2)?;
            PerturbationRate::Power {
                coef: args[0],
                exponent: args[1],
            }
        }
        other => return Err(bad(key, format!("unknown rate `{other}`"))),
    })
}

fn direction(r: &mut Resolver, key: &str, d: usize) -> Result<PerturbationDirection<f64>, CliError> {
    let (head, args) = r.tagged(key)?;
    let none = |args: &[f64]| args_exact(key, args, 0);
    Ok(match head.as_str() {
        "zero" => {
            none(&args)?;
            PerturbationDirection::Zero
        }
        "tanh" => {
            none(&args)?;
            PerturbationDirection::Tanh
        }
        "sin" => {
            none(&args)?;
            PerturbationDirection::Sin
        }
        "unit" => {
            args_exact(key, &args, d)?;
            PerturbationDirection::Unit(args)
        }
        other => return Err(bad(key, format!("unknown direction `{other}`"))),
    })
}

pub fn problem(r: &mut Resolver) -> Result<Problem, CliError> {
    let d: usize = r.parse("problem.dim")?;
    if d == 0 {
        return Err(bad("problem.dim", "must be positive"));
    }
    let x0 = dim_vector(r, "problem.x0", d)?;
    let domain = domain(r, d)?;
    let (mhead, margs) = r.tagged("problem.modulus")?;
    let modulus = concave_modulus("problem.modulus", &mhead, &margs)?;
    let coeffs = KernelCoefficients::new(
        d,
        drift(r, d)?,
        diffusion(r, d)?,
        jump(r, d)?,
        r.parse("problem.growth")?,
        modulus,
    )?;
    let family = PerturbationFamily {
        rho_b: rate(r, "problem.rho_b")?,
        rho_sigma: rate(r, "problem.rho_sigma")?,
        rho_g: rate(r, "problem.rho_g")?,
        h_b: direction(r, "problem.h_b", d)?,
        h_sigma: direction(r, "problem.h_sigma", d)?,
        h_g: direction(r, "problem.h_g", d)?,
    };
    let jumps = marks(r)?;
    if jumps.is_none() && !coeffs.jump.is_zero() {
        return Err(bad("problem.marks", "a jump kernel needs a mark space"));
    }
    Ok(Problem::new(coeffs, family, domain, jumps, x0)?)
}
