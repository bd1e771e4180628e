"""Configuration, error types, events, RNG streams and run manifests."""
