"""整合測試模組

此目錄包含整合測試，用於驗證多個模組間的互動與端到端流程。
"""
