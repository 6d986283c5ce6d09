"""
End-to-end command runs on simulated data.
"""
