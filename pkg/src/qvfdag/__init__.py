"""Structure learning for quadratic-variance-function DAG models."""
