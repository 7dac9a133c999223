"""Tests package for EntLaser"""
