"""Subcommands of the bpkit command-line tool, one module per subcommand."""
