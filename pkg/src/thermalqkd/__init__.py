"""Gaussian simulation of thermal-state central-broadcast key distribution."""

__version__ = "0.1.0"

from .gaussian import (
    GaussianState,
    SymplecticTransform,
    apply,
    beamsplitter,
    bose_einstein_nbar,
    check_physical,
    direct_sum,
    make_thermal,
    reduce,
    symplectic_eigenvalues,
    symplectic_form,
    thermal_variance,
    von_neumann_entropy,
)
from .network import (
    NetworkOutput,
    ProtocolParams,
    appendix_Gamma_out,
    appendix_gamma_out,
    build_network,
    thermal_channel_input_variance,
)
from .secrecy import (
    SecrecyReport,
    conditional_cov_homodyne,
    conditional_mutual_information,
    discord,
    mutual_information,
    secrecy_report,
    secrecy_verdict,
)
