"""
CLI Module for the Recurrent Priming Codec

Argument parsing, configuration resolution and the subcommand handlers.
"""

from .config_loader import (
    CliConfig,
    load_cli_config,
    merge_document,
    from_preset,
    log_settings,
    SECTIONS,
)

from .app import (
    build_parser,
    main,
    cmd_train,
    cmd_compress,
    cmd_decompress,
    cmd_eval,
    cmd_bd,
    cmd_analyze,
    cmd_make_corpus,
)

__all__ = [
    # Configuration
    'CliConfig',
    'load_cli_config',
    'merge_document',
    'from_preset',
    'log_settings',
    'SECTIONS',
    # Commands
    'build_parser',
    'main',
    'cmd_train',
    'cmd_compress',
    'cmd_decompress',
    'cmd_eval',
    'cmd_bd',
    'cmd_analyze',
    'cmd_make_corpus',
]
