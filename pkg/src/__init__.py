"""Bus fast-charging station scheduler with on-site energy storage."""
