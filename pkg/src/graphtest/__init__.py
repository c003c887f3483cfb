"""Two-sample hypothesis tests for graphs on a common vertex set."""
