"""Runnable pipelines behind the forenlab commands."""
