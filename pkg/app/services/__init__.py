"""
FWI Engine Services Package - forward modelling and Gauss-Newton inversion

Core Services:
- grid_pml: computational grid and PML coordinate stretching
- sparse_la: CSR helpers, exact LU, ILU(p), CG and GMRes
- helmholtz_assembly: 5-point PML Helmholtz operator and P-blocks
- forward_problem: multi-source simulation, observation, residuals, weights
- reduced_space: matrix-free Jacobian/Hessian and RSGN-CG
- full_space_kkt: KKT operator, block preconditioners and FSGN-GMRes
- multi_freq_driver: frequency continuation of single GN steps
- oracle_dense: brute-force dense references for verification
- model_builder: synthetic and imported velocity models
- process_callback: progress reporting for long runs
"""
