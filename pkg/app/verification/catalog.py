from __future__ import annotations

"""Named checks of the verification suite with their tolerances."""

CHECK_CATALOG: dict[str, tuple[str, float]] = {
    "projector_complement": ("interior + exterior projector equals the identity (max entry)", 1e-12),
    "projector_idempotency_interior": ("||P^2 - P|| of the interior projector on smooth traces", 0.05),
    "projector_idempotency_exterior": ("||P^2 - P|| of the exterior projector on smooth traces", 0.05),
    "range_complementarity": ("||P_int P_ext|| on smooth traces", 0.05),
    "plane_wave_interior_cauchy": ("plane-wave traces are fixed by the interior projector", 0.05),
    "point_source_exterior_cauchy": ("point-source traces are fixed by the exterior projector", 0.05),
    "v_symmetry": ("V Galerkin matrix equals its transpose", 1e-12),
    "w_symmetry": ("W Galerkin matrix equals its transpose", 1e-12),
    "duality": ("K_adj + K^T relative to K", 0.02),
    "dirichlet_bie_point_source": ("exterior Dirichlet BIE recovers point-source Neumann data", 0.05),
    "neumann_bie_point_source": ("exterior Neumann BIE recovers point-source Dirichlet data", 0.05),
    "dtn_consistency": ("DtN1 and DtN2 agree on smooth Dirichlet data", 0.1),
    "coupled_symmetry": ("transpose symmetry of the coupled matrix", 0.02),
    "transparency_interior": ("homogeneous medium: U equals the incident wave in the interior", 0.02),
    "transparency_exterior": ("homogeneous medium: scattered field vanishes at the probes", 0.02),
    "representation_formula": ("point-source field reproduced from its exterior traces", 0.02),
    "gauss_identity": ("double layer of 1 is 1 inside and 0 outside", 1e-2),
    "jump_relations": ("layer potential jumps at eps = 0.1 h", 0.1),
    "green_first_formula": ("discrete Green's first formula on a smooth field", 0.02),
    "fem_dirichlet_eigenvalue": ("first Dirichlet eigenvalue of the disk vs j_01^2", 0.01),
    "v_kernel": ("near-null space of V at j_01 vs FEM Neumann eigentraces (angle)", 0.1),
    "kadj_kernel_overlap": ("near-null spaces of -K_adj + 1/2 and V coincide (angle)", 0.15),
    "w_kernel": ("near-null space of W at j'_11 vs FEM Dirichlet traces of Neumann modes (angle)", 0.15),
    "khalf_kernel_overlap": ("near-null spaces of -K + 1/2 and W coincide (angle)", 0.15),
    "coupled_kernel_interior_ratio": ("coupled kernel has no interior component", 0.05),
    "coupled_kernel_angle": ("xi-part of the coupled kernel vs FEM eigentraces (angle)", 0.1),
    "coupled_neumann_regular": ("coupled matrix keeps sigma_min near its floor at j'_11 (floor / sigma_min)", 10.0),
    "kernel_annihilation": ("exterior field of a spurious xi relative to a generic density", 0.05),
}

# 円形領域でのみ意味を持つ検査 (Bessel 零点を参照)
DISK_ONLY_CHECKS = frozenset(
    {
        "fem_dirichlet_eigenvalue",
        "v_kernel",
        "kadj_kernel_overlap",
        "w_kernel",
        "khalf_kernel_overlap",
        "coupled_neumann_regular",
        "coupled_kernel_interior_ratio",
        "coupled_kernel_angle",
        "kernel_annihilation",
    }
)
