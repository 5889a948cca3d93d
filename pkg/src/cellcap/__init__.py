"""Downlink capacity versus BS density in PPP cellular networks."""
