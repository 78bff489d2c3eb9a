"""CLI subcommand services and wire formats."""
