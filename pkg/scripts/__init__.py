"""Pipeline scripts of the DOA toolkit: CLI services and independent validators."""
