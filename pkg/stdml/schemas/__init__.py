"""Validated configuration schemas"""
