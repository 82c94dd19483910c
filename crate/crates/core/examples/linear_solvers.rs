//! Preconditioned CG and BiCGStab on a heterogeneous five-point Laplacian.

use porous_fv::linsolve::{solve, Preconditioner, SolverControls, SparseSystem};
use porous_fv::mesh::Mesh;

fn main() -> porous_fv::Result<()> {
    let mesh = Mesh::build_cartesian(128, 128, 1, [1.0; 3], [0.0; 3])?;
    let k = |c: usize| {
        if (c / 128 / 16 + c % 128 / 16).is_multiple_of(2) {
            1.0
        } else {
            1e-3
        }
    };

    let mut sym = SparseSystem::for_mesh(&mesh);
    for (i, f) in mesh.faces().iter().enumerate() {
        let t = 2.0 / (1.0 / k(f.owner) + 1.0 / k(f.neighbour));
        sym.upper[i] = -t;
        sym.lower[i] = -t;
        sym.diag[f.owner] += t;
        sym.diag[f.neighbour] += t;
    }
    // pin the corners to make the problem definite
    let n = mesh.n_cells();
    sym.diag[0] += 1.0;
    sym.diag[n - 1] += 1.0;
    sym.rhs[n - 1] = 1.0;

    // an upwinded drift along x makes a non-symmetric variant
    let mut drift = sym.clone();
    for (i, f) in mesh.faces().iter().enumerate() {
        if f.axis == 0 {
            drift.lower[i] -= 0.5;
            drift.diag[f.neighbour] += 0.5;
        }
    }

    for (name, system) in [("symmetric", &sym), ("with drift", &drift)] {
        for pc in [
            Preconditioner::None,
            Preconditioner::Jacobi,
            Preconditioner::Dilu,
        ] {
            let controls = SolverControls::pressure()
                .with_preconditioner(pc)
                .with_tolerance(1e-10);
            let r = solve(system, &vec![0.0; n], &controls)?;
            println!(
                "{name:>10} {:?} {pc:?}: {} iterations, residual {:.2e}",
                r.method, r.iterations, r.residual
            );
        }
    }
    Ok(())
}
