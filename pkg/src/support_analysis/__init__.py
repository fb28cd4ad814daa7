"""
Support Analysis Module for the Recurrent Priming Codec

Analytic spatial supports, empirical receptive fields and the stacked
IIR initialization-error model.
"""

from .spatial_support import (
    SupportQuery,
    encoder_support,
    decoder_support_bits,
    max_support_bits,
    image_support,
    support_table,
)

from .iir_model import (
    IirConfig,
    iir_error,
    iir_simulate,
    min_priming_steps,
    iir_table,
)

from .receptive_field import (
    ReceptiveField,
    create_probe_network,
    empirical_receptive_field,
)

__all__ = [
    # Analytic supports
    'SupportQuery',
    'encoder_support',
    'decoder_support_bits',
    'max_support_bits',
    'image_support',
    'support_table',
    # IIR model
    'IirConfig',
    'iir_error',
    'iir_simulate',
    'min_priming_steps',
    'iir_table',
    # Empirical fields
    'ReceptiveField',
    'create_probe_network',
    'empirical_receptive_field',
]
