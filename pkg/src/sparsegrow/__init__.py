"""Always-sparse dynamic sparse training."""
