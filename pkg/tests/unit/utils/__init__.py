"""Utils 模組單元測試"""
